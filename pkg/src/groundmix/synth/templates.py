from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .samples import BRANCHES, INTER

PLACEHOLDER = "{label}"


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class Template:
    template_id: str
    branch: str
    pattern: str

    def render(self, label: str) -> str:
        # plain replacement: labels may contain braces
        return self.pattern.replace(PLACEHOLDER, label)


class TemplatePool:
    """Query templates split into inter and intra subsets."""

    def __init__(self, templates: Iterable[Template]):
        self.templates = tuple(templates)
        ids = [t.template_id for t in self.templates]
        if len(set(ids)) != len(ids):
            raise TemplateError("duplicate template ids")
        for t in self.templates:
            if t.branch not in BRANCHES:
                raise TemplateError(f"template {t.template_id}: unknown branch {t.branch!r}")
            n = t.pattern.count(PLACEHOLDER)
            if t.branch == INTER and n != 1:
                raise TemplateError(f"inter template {t.template_id} must contain exactly one {PLACEHOLDER}")
            if n > 1:
                raise TemplateError(f"template {t.template_id} repeats {PLACEHOLDER}")
        for branch in BRANCHES:
            if not self.subset(branch):
                raise TemplateError(f"no templates for branch {branch!r}")

    def subset(self, branch: str) -> tuple[Template, ...]:
        return tuple(t for t in self.templates if t.branch == branch)

    def choose(self, branch: str, rng) -> Template:
        pool = self.subset(branch)
        return pool[int(rng.integers(len(pool)))]

    def __len__(self):
        return len(self.templates)

    @classmethod
    def from_records(cls, rows: Iterable[Mapping]) -> "TemplatePool":
        return cls(Template(str(r["id"]), str(r["branch"]), str(r["pattern"])) for r in rows)

    @classmethod
    def load(cls, path: str | Path) -> "TemplatePool":
        with open(path, encoding="utf-8") as fh:
            return cls.from_records(json.load(fh))

    @classmethod
    def default(cls) -> "TemplatePool":
        text = resources.files("groundmix.assets").joinpath("templates.json").read_text(encoding="utf-8")
        return cls.from_records(json.loads(text))
