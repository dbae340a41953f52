"""Plain-text key = value config files (one pair per line, # comments).

Values stay strings at this layer; callers coerce. Lists are
comma-separated. This tiny dialect covers manifests and experiment
configs without pulling in a parser dependency.
"""

from __future__ import annotations

__all__ = ["format_kv", "parse_kv", "parse_kv_file", "split_list"]


def parse_kv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        out[key.strip()] = value.strip()
    return out


def parse_kv_file(path) -> dict[str, str]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_kv(fh.read())


def format_kv(pairs: dict) -> str:
    return "".join(f"{k} = {v}\n" for k, v in pairs.items())


def split_list(value: str) -> list[str]:
    return [item.strip() for item in value.split(",") if item.strip()]
