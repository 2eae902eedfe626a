"""ASCII PLY point I/O. Only vertex x/y/z are used, other properties are ignored."""

import logging
from pathlib import Path

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from steinloc.exceptions import PlyFormatError

logger = logging.getLogger(__name__)


def _parse_header(path: Path) -> tuple[int, int, list[str]]:
    """Returns (header line count, vertex count, vertex property names)."""
    n_vertex = None
    properties: list[str] = []
    element = None
    with path.open("r", encoding="ascii", errors="replace") as fh:
        first = fh.readline().strip()
        if first != "ply":
            raise PlyFormatError(f"{path}: missing 'ply' magic line")
        for count, line in enumerate(fh, start=2):
            tokens = line.split()
            if not tokens or tokens[0] in ("comment", "obj_info"):
                continue
            match tokens[0]:
                case "format":
                    if len(tokens) < 2 or tokens[1] != "ascii":
                        raise PlyFormatError(f"{path}: only ascii PLY is supported, got {line.strip()}")
                case "element":
                    element = tokens[1]
                    if element == "vertex":
                        n_vertex = int(tokens[2])
                case "property":
                    if element != "vertex":
                        continue
                    if tokens[1] == "list":
                        raise PlyFormatError(f"{path}: list properties on vertices are not supported")
                    properties.append(tokens[-1])
                case "end_header":
                    if n_vertex is None:
                        raise PlyFormatError(f"{path}: no vertex element")
                    if not {"x", "y", "z"} <= set(properties):
                        raise PlyFormatError(f"{path}: vertex lacks x/y/z properties")
                    return count, n_vertex, properties
    raise PlyFormatError(f"{path}: header has no end_header")


def read_ply(path: str | Path) -> NDArray[np.float64]:
    """Read vertex positions from an ASCII PLY file.

    Args:
        path (str | Path): PLY file.

    Raises:
        PlyFormatError: binary encoding, missing x/y/z, or truncated body.

    Returns:
        NDArray[np.float64]: (N, 3) points.
    """
    path = Path(path)
    n_header, n_vertex, properties = _parse_header(path)
    if n_vertex == 0:
        return np.zeros((0, 3))
    try:
        body = pd.read_csv(
            path,
            sep=r"\s+",
            header=None,
            skiprows=n_header,
            nrows=n_vertex,
            usecols=range(len(properties)),
            names=properties,
            engine="python",
        )
    except (ValueError, pd.errors.ParserError) as e:
        raise PlyFormatError(f"{path}: cannot parse vertex rows: {e}") from e
    if len(body) != n_vertex:
        raise PlyFormatError(f"{path}: expected {n_vertex} vertices, read {len(body)}")
    points = body[["x", "y", "z"]].apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
    if not np.all(np.isfinite(points)):
        raise PlyFormatError(f"{path}: non-numeric vertex coordinates")
    logger.debug(f"Read {n_vertex} points from {path}")
    return points


def write_ply(path: str | Path, points: NDArray[np.float64]) -> Path:
    path = Path(path)
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    header = "\n".join(
        [
            "ply",
            "format ascii 1.0",
            f"element vertex {len(points)}",
            "property double x",
            "property double y",
            "property double z",
            "end_header",
        ]
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="ascii", newline="\n") as fh:
        fh.write(header + "\n")
        pd.DataFrame(points).to_csv(
            fh, sep=" ", header=False, index=False, float_format="%.9f", lineterminator="\n"
        )
    return path
