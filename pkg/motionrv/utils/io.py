import hashlib
from pathlib import Path


def find_in_subfolders(name: str,
                       levels: int,
                       start_path: Path | None = None) -> list[Path]:
    r"""Breadth-first search below ``start_path`` for entries called
    ``name``.

    Args:
        name (str): File or folder name to look for.
        levels (int): How many subdirectory levels to descend
            (0 means only ``start_path`` itself).
        start_path (Optional[Path]): Where to start (defaults to the
            current working directory).

    Returns:
        Matching paths, shallowest first and sorted within a level so the
        result does not depend on directory listing order.
    """
    start_path = start_path or Path.cwd()
    matches: list[Path] = []
    frontier = [start_path]
    for depth in range(levels + 1):
        next_frontier: list[Path] = []
        for folder in frontier:
            try:
                entries = sorted(folder.iterdir())
            except OSError:
                # Unreadable directories are skipped
                continue
            for item in entries:
                if item.name == name:
                    matches.append(item)
                if item.is_dir() and depth < levels:
                    next_frontier.append(item)
        frontier = next_frontier
    return matches


def find_in_parent_folders(name: str,
                           levels: int,
                           start_path: Path | None = None) -> list[Path]:
    r"""Walk up from ``start_path`` looking for ``name``.

    Args:
        name (str): File or folder name to look for.
        levels (int): Number of parent levels to climb.
        start_path (Optional[Path]): Where to start (defaults to the
            current working directory).

    Returns:
        Matching paths, nearest first.
    """
    current = start_path or Path.cwd()
    matches: list[Path] = []
    for _ in range(levels + 1):
        candidate = current / name
        if candidate.exists():
            matches.append(candidate)
        if current.parent == current:
            break
        current = current.parent
    return matches


def sha256_file(path: Path, chunk_size: int = 1 << 20) -> str:
    """Hex SHA-256 digest of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(chunk_size), b""):
            digest.update(chunk)
    return digest.hexdigest()


def ensure_dir(path: str | Path) -> Path:
    """Create ``path`` (and parents) if missing and return it."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path
