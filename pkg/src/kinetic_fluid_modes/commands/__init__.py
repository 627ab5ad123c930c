"""서브커맨드 구현 모음."""

from . import evolve, scaling, spectrum, verify

__all__ = ["evolve", "scaling", "spectrum", "verify"]
