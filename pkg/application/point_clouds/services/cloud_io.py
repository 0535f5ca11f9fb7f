import logging
from pathlib import Path
from typing import Dict, List, Optional, TextIO

import numpy as np

from application.point_clouds.exceptions import (
    CloudChannelError,
    CloudFormatError,
    CloudIOError,
)
from application.point_clouds.models import CloudFormat, PointCloud

logger = logging.getLogger(__name__)

# %.17g восстанавливает float64 без потерь
NUMBER_FORMAT = "%.17g"

POSITION_FIELDS = ("x", "y", "z")
NORMAL_FIELDS = ("nx", "ny", "nz")
SCALAR_FIELDS = ("variation", "confidence")


def load_cloud(path: str | Path, cloud_format: Optional[CloudFormat] = None) -> PointCloud:
    """
    Читает облако из PLY (ascii) или XYZ.

    Нормали из файла перенормируются; нулевая нормаль - ошибка с номером строки.
    """
    path = Path(path)
    if cloud_format is None:
        cloud_format = CloudFormat.from_path(str(path))

    try:
        with path.open("r", encoding="utf-8") as stream:
            if cloud_format == CloudFormat.PLY_ASCII:
                columns = _read_ply(stream, str(path))
            else:
                columns = _read_xyz(stream, str(path))
    except OSError as e:
        raise CloudIOError(message=f"Cannot read {path}: {e}") from e
    except UnicodeDecodeError as e:
        raise CloudFormatError(f"not a UTF-8 text file ({e.reason})", path=str(path)) from e

    cloud = _assemble_cloud(columns, str(path))
    logger.debug(
        "Point cloud loaded",
        extra={
            "path": str(path),
            "format": cloud_format.value,
            "points": len(cloud),
            "has_normals": cloud.has_normals,
        },
    )
    return cloud


def save_cloud(
    cloud: PointCloud, path: str | Path, cloud_format: Optional[CloudFormat] = None
) -> None:
    path = Path(path)
    if cloud_format is None:
        cloud_format = CloudFormat.from_path(str(path))

    names, table = _cloud_table(cloud, cloud_format)
    try:
        with path.open("w", encoding="utf-8") as stream:
            if cloud_format == CloudFormat.PLY_ASCII:
                stream.write("ply\n")
                stream.write("format ascii 1.0\n")
                stream.write(f"element vertex {len(cloud)}\n")
                for name in names:
                    stream.write(f"property double {name}\n")
                stream.write("end_header\n")
            if len(cloud):
                np.savetxt(stream, table, fmt=NUMBER_FORMAT)
    except OSError as e:
        raise CloudIOError(message=f"Cannot write {path}: {e}") from e

    logger.debug(
        "Point cloud saved",
        extra={"path": str(path), "format": cloud_format.value, "points": len(cloud)},
    )


def _cloud_table(
    cloud: PointCloud, cloud_format: CloudFormat
) -> tuple[List[str], np.ndarray]:
    names = list(POSITION_FIELDS)
    blocks = [cloud.points]
    if cloud.normals is not None:
        names.extend(NORMAL_FIELDS)
        blocks.append(cloud.normals)
    # XYZ хранит только позиции и нормали
    if cloud_format == CloudFormat.PLY_ASCII:
        if cloud.variations is not None:
            names.append("variation")
            blocks.append(cloud.variations[:, None])
        if cloud.confidences is not None:
            names.append("confidence")
            blocks.append(cloud.confidences[:, None])
    return names, np.hstack(blocks) if len(cloud) else np.zeros((0, len(names)))


def _parse_row(tokens: List[str], line_no: int, path: str) -> List[float]:
    try:
        return [float(token) for token in tokens]
    except ValueError as e:
        raise CloudFormatError(f"non-numeric token ({e})", line=line_no, path=path)


def _read_ply(stream: TextIO, path: str) -> Dict[str, np.ndarray]:
    line_no = 0

    def next_line() -> str:
        nonlocal line_no
        raw = stream.readline()
        line_no += 1
        if raw == "":
            raise CloudFormatError("unexpected end of file", line=line_no, path=path)
        return raw.strip()

    if next_line() != "ply":
        raise CloudFormatError("missing 'ply' magic", line=line_no, path=path)

    vertex_count: Optional[int] = None
    properties: List[str] = []
    rows_before_vertex = 0
    current_element: Optional[str] = None
    format_seen = False

    while True:
        line = next_line()
        if not line or line.startswith("comment") or line.startswith("obj_info"):
            continue
        tokens = line.split()
        keyword = tokens[0]
        if keyword == "format":
            if len(tokens) < 2 or tokens[1] != "ascii":
                raise CloudFormatError(
                    f"unsupported format '{' '.join(tokens[1:])}', only ascii",
                    line=line_no,
                    path=path,
                )
            format_seen = True
        elif keyword == "element":
            if len(tokens) != 3:
                raise CloudFormatError("malformed element line", line=line_no, path=path)
            current_element = tokens[1]
            try:
                count = int(tokens[2])
            except ValueError:
                raise CloudFormatError(
                    f"non-numeric element count '{tokens[2]}'", line=line_no, path=path
                )
            if current_element == "vertex":
                vertex_count = count
            elif vertex_count is None:
                # Элементы до vertex пропускаем построчно
                rows_before_vertex += count
        elif keyword == "property":
            if current_element is None or len(tokens) < 3:
                raise CloudFormatError("malformed property line", line=line_no, path=path)
            if tokens[1] == "list":
                if current_element == "vertex":
                    raise CloudFormatError(
                        "list properties on vertices are not supported",
                        line=line_no,
                        path=path,
                    )
                continue
            if current_element == "vertex":
                properties.append(tokens[-1])
        elif keyword == "end_header":
            break
        else:
            raise CloudFormatError(f"unknown header keyword '{keyword}'", line=line_no, path=path)

    if not format_seen:
        raise CloudFormatError("missing format line", line=line_no, path=path)
    if vertex_count is None:
        raise CloudFormatError("missing vertex element", line=line_no, path=path)
    for name in POSITION_FIELDS:
        if name not in properties:
            raise CloudFormatError(f"missing vertex property '{name}'", line=line_no, path=path)

    for _ in range(rows_before_vertex):
        next_line()

    rows: List[List[float]] = []
    row_lines: List[int] = []
    while len(rows) < vertex_count:
        line = next_line()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) != len(properties):
            raise CloudFormatError(
                f"expected {len(properties)} values, got {len(tokens)}",
                line=line_no,
                path=path,
            )
        rows.append(_parse_row(tokens, line_no, path))
        row_lines.append(line_no)

    table = np.array(rows, dtype=np.float64).reshape(len(rows), len(properties))
    columns = {name: table[:, i] for i, name in enumerate(properties)}
    columns["__lines__"] = np.array(row_lines)
    return columns


def _read_xyz(stream: TextIO, path: str) -> Dict[str, np.ndarray]:
    rows: List[List[float]] = []
    row_lines: List[int] = []
    width: Optional[int] = None
    for line_no, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) not in (3, 6):
            raise CloudFormatError(
                f"expected 3 or 6 values, got {len(tokens)}", line=line_no, path=path
            )
        if width is None:
            width = len(tokens)
        elif len(tokens) != width:
            raise CloudFormatError(
                f"inconsistent column count {len(tokens)} (expected {width})",
                line=line_no,
                path=path,
            )
        rows.append(_parse_row(tokens, line_no, path))
        row_lines.append(line_no)

    width = width or 3
    table = np.array(rows, dtype=np.float64).reshape(len(rows), width)
    names = POSITION_FIELDS + (NORMAL_FIELDS if width == 6 else ())
    columns = {name: table[:, i] for i, name in enumerate(names)}
    columns["__lines__"] = np.array(row_lines)
    return columns


def _assemble_cloud(columns: Dict[str, np.ndarray], path: str) -> PointCloud:
    points = np.column_stack([columns[name] for name in POSITION_FIELDS])
    if not np.all(np.isfinite(points)):
        bad = int(np.argwhere(~np.isfinite(points))[0][0])
        raise CloudFormatError(
            "non-finite coordinate", line=int(columns["__lines__"][bad]), path=path
        )

    normals = None
    present = [name in columns for name in NORMAL_FIELDS]
    if any(present):
        if not all(present):
            raise CloudFormatError("partial normal fields (need nx, ny, nz)", path=path)
        raw = np.column_stack([columns[name] for name in NORMAL_FIELDS])
        lengths = np.linalg.norm(raw, axis=1)
        zero = np.flatnonzero(~(lengths > 0.0) | ~np.isfinite(lengths))
        if zero.size:
            raise CloudFormatError(
                "normal with zero length",
                line=int(columns["__lines__"][zero[0]]),
                path=path,
            )
        normals = raw / lengths[:, None]

    scalars = {}
    for name, channel in (("variation", "variations"), ("confidence", "confidences")):
        if name in columns:
            scalars[channel] = columns[name]

    try:
        return PointCloud(points=points, normals=normals, **scalars)
    except ValueError as e:
        raise CloudChannelError(
            message=f"{path}: invalid channel values: {e}", details={"path": path}
        ) from e
