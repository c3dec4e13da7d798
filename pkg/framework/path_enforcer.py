"""Output-path confinement for reports and spectra.

Every file the runner writes must resolve inside a declared output root and
never inside a protected directory (the run-log directory).
"""

from __future__ import annotations

import os
from pathlib import Path

OUTPUT_ROOTS_ENV = "BUNDLELAB_OUTPUT_ROOTS"


def _existing_dir(raw: str | Path) -> Path:
    root = Path(raw).resolve()
    if not root.exists():
        raise ValueError(f"output root does not exist: {raw}")
    if not root.is_dir():
        raise ValueError(f"output root is not a directory: {raw}")
    return root


class PathEnforcer:
    """
    Confines runner output to declared roots.

    Targets need not exist yet: a report path is resolved and checked first,
    and only then is its parent directory created (see prepare()).
    """

    def __init__(
        self,
        allowed_roots: list[str | Path],
        protected_dirs: list[str | Path] | None = None,
    ):
        """
        Args:
            allowed_roots: Directories reports and spectra may be written under.
            protected_dirs: Never written, even inside an allowed root.
        """
        if not allowed_roots:
            raise ValueError("at least one output root is required")
        self.allowed_roots: list[Path] = [_existing_dir(r) for r in allowed_roots]
        self.protected_dirs: list[Path] = [Path(d).resolve() for d in protected_dirs or ()]

    def check(self, path: str | Path, operation: str = "write") -> Path:
        """
        Resolve `path` and return it when `operation` may write there.

        Raises PermissionError, with a message fit for the run log, when the
        target is inside a protected directory or outside every root.
        """
        try:
            target = Path(path).resolve()
        except (OSError, RuntimeError) as exc:
            raise PermissionError(f"{operation}: cannot resolve {path!s}: {exc}") from exc

        blocked = next((d for d in self.protected_dirs if target.is_relative_to(d)), None)
        if blocked is not None:
            raise PermissionError(f"{operation}: {target} is inside protected directory {blocked}")

        if any(target.is_relative_to(root) for root in self.allowed_roots):
            return target

        listed = ", ".join(str(r) for r in self.allowed_roots)
        raise PermissionError(f"{operation}: {target} is outside allowed output roots [{listed}]")

    def prepare(self, path: str | Path, operation: str = "write") -> Path:
        """check() and create the parent directory."""
        target = self.check(path, operation)
        target.parent.mkdir(parents=True, exist_ok=True)
        return target

    @classmethod
    def from_env(cls, protected_dirs: list[str | Path] | None = None) -> "PathEnforcer":
        """Roots from $BUNDLELAB_OUTPUT_ROOTS (os.pathsep separated), else the working directory."""
        raw = os.environ.get(OUTPUT_ROOTS_ENV, "")
        roots: list[str | Path] = [r for r in raw.split(os.pathsep) if r.strip()] or [os.getcwd()]
        return cls(allowed_roots=roots, protected_dirs=protected_dirs)
