"""Packaged data files: schema, prompt templates, task blocks, environment definitions."""
