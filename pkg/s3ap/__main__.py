from s3ap.app import main

main()
