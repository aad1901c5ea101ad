"""Prompt rendering: the single place where samples become model input."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

from ..synth.samples import MultiImageSample

QUERY_SUFFIX_SEPARATOR = "\n"


@lru_cache(maxsize=None)
def _asset(name: str) -> str:
    return resources.files("groundmix.assets").joinpath(name).read_text(encoding="utf-8")


def system_prompt() -> str:
    return _asset("system_prompt.txt")


def user_suffix() -> str:
    return _asset("user_suffix.txt")


def user_text(query: str) -> str:
    return f"{query}{QUERY_SUFFIX_SEPARATOR}{user_suffix()}"


def render_messages(sample: MultiImageSample) -> list[dict]:
    """Chat messages for one sample: system prompt, then images in slot order and the query."""
    content = [{"type": "image", "image": slot.image} for slot in sample.slots]
    content.append({"type": "text", "text": user_text(sample.query)})
    return [
        {"role": "system", "content": system_prompt()},
        {"role": "user", "content": content},
    ]
