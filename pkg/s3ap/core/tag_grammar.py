"""
Grammar of the special tags that may appear inside observation and state text.

    <same_as_state />               the observation covers the current state
    <same_as_last_action />         all non-none actions of the previous timestep
    <same_as_last_action_X />       the previous action of the X-th agent (1-based)
    <mental_state>TEXT</mental_state>   introspective content

Whitespace is tolerated inside the brackets. Anything else that looks like one of
these tags is malformed.
"""

import re
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from s3ap.core import MalformedTagError

TAG_PATTERN = re.compile(
    r"<\s*same_as_state\s*/\s*>"
    r"|<\s*same_as_last_action(?:_(?P<index>\w+))?\s*/\s*>"
    r"|<\s*mental_state\s*>(?P<mental>.*?)<\s*/\s*mental_state\s*>",
    re.DOTALL,
)

# Leftovers of a tag that did not match the grammar.
TAG_FRAGMENT = re.compile(r"<\s*/?\s*(same_as|mental_state)", re.IGNORECASE)


class TokenKind(str, Enum):
    TEXT = "text"
    SAME_AS_STATE = "same_as_state"
    LAST_ACTION = "same_as_last_action"
    MENTAL = "mental_state"


@dataclass(frozen=True)
class TagToken:
    kind: TokenKind
    text: str = ""
    index: Optional[int] = None


def contains_tag_fragment(text: str) -> bool:
    """True when `text` holds anything resembling a special tag."""
    return TAG_FRAGMENT.search(text) is not None


def _check_plain(text: str, source: str) -> None:
    if contains_tag_fragment(text):
        raise MalformedTagError("Unparseable special tag", source)


def tokenize(text: str) -> list[TagToken]:
    """
    Split `text` into plain-text and tag tokens, left to right.

    Raises:
        MalformedTagError: on tag-like fragments outside the grammar, a non-positive
            or non-numeric agent index, or an empty mental state.
    """
    tokens: list[TagToken] = []
    cursor = 0
    for match in TAG_PATTERN.finditer(text):
        before = text[cursor : match.start()]
        if before:
            _check_plain(before, text)
            tokens.append(TagToken(TokenKind.TEXT, before))
        cursor = match.end()

        tag = match.group(0)
        if match.group("mental") is not None:
            content = match.group("mental").strip()
            if not content:
                raise MalformedTagError("Empty <mental_state> tag", text)
            _check_plain(content, text)
            tokens.append(TagToken(TokenKind.MENTAL, content))
        elif "same_as_last_action" in tag:
            raw_index = match.group("index")
            index = None
            if raw_index is not None:
                if not re.fullmatch(r"[0-9]+", raw_index) or int(raw_index) < 1:
                    raise MalformedTagError(
                        f"Agent index must be a positive integer, got '{raw_index}'", text
                    )
                index = int(raw_index)
            tokens.append(TagToken(TokenKind.LAST_ACTION, tag, index))
        else:
            tokens.append(TagToken(TokenKind.SAME_AS_STATE, tag))

    rest = text[cursor:]
    if rest:
        _check_plain(rest, text)
        tokens.append(TagToken(TokenKind.TEXT, rest))
    return tokens


def has_tags(text: str) -> bool:
    return any(token.kind is not TokenKind.TEXT for token in tokenize(text))
