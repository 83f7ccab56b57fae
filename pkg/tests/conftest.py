"""Shared fixtures: paths into the committed mini dump corpus and a helper
that writes pipeline configs pointing at a temporary output directory."""

from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures" / "mini"


@pytest.fixture
def mini() -> Path:
    return FIXTURES


@pytest.fixture
def mini_config(tmp_path):
    """Write a pipeline config over the mini fixture; returns the config path."""

    def make(out_name="out", **overrides):
        thresholds = overrides.pop("thresholds", {"min_mentions": 5})
        bm = {"variant": "plus", "window": 16, "k": 8}
        bm.update(overrides.pop("bm25", {}))
        lines = [
            "languages: [en, de, fr]",
            f"wikidata: {FIXTURES / 'wikidata.jsonl'}",
            "wikipedia:",
            *(f"  {lg}: {FIXTURES / (lg + 'wiki.xml')}" for lg in ("en", "de", "fr")),
            "wikinews:",
            *(f"  {lg}: {FIXTURES / (lg + 'wikinews.xml')}" for lg in ("en", "de", "fr")),
            f"out: {tmp_path / out_name}",
            "thresholds:",
            *(f"  {k}: {v}" for k, v in thresholds.items()),
            "split:",
            f"  seed: {overrides.pop('seed', 13)}",
            "bm25:",
            *(f"  {k}: {v}" for k, v in bm.items()),
            f"task: {overrides.pop('task', 'multilingual')}",
            f"eval_split: {overrides.pop('eval_split', 'test')}",
        ]
        for k, v in overrides.items():
            lines.append(f"{k}: {v}")
        path = tmp_path / f"config-{out_name}.yaml"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return make
