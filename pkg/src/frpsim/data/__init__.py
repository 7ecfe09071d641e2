"""Bundled example systems and the benchmark corpus."""

from importlib import resources


def case_path(name):
    """Filesystem path of a bundled YAML case (without extension)."""
    if not name.endswith(".yaml"):
        name += ".yaml"
    return str(resources.files(__name__) / name)


def corpus_path(name):
    """Path of a file under the bundled benchmark corpus."""
    return str(resources.files(__name__) / "corpus" / name)
