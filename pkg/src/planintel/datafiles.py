"""Access to packaged data files (lexicons, templates, task configs, fixtures)."""

from __future__ import annotations

from pathlib import Path

DATA_DIR = Path(__file__).resolve().parent / "data"


def data_path(*parts: str) -> Path:
    path = DATA_DIR.joinpath(*parts)
    if not path.exists():
        raise FileNotFoundError(f"packaged data file missing: {path}")
    return path


def read_lexicon(name: str) -> list[str]:
    """Lexicon files: one entry per line, '#' comments and blanks ignored."""
    lines = data_path("lexicons", name).read_text(encoding="utf-8").splitlines()
    return [line.strip() for line in lines if line.strip() and not line.startswith("#")]
