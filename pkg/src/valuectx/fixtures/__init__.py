"""Bundled example programs."""
from importlib import resources


def fixture_names() -> list[str]:
    return sorted(p.name[:-3] for p in resources.files(__name__).iterdir()
                  if p.name.endswith(".ir"))


def fixture_text(name: str) -> str:
    return resources.files(__name__).joinpath(f"{name}.ir").read_text()


def load_fixture(name: str):
    from ..parser import parse_program
    return parse_program(fixture_text(name))
