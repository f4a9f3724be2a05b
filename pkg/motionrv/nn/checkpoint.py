"""Plain-text model checkpoints.

Layout::

    motionrv-checkpoint 1 window_len=65 <layer spec string>
    conv1.weight 32,96,5
    <row-major values, 17 significant digits, space separated>
    conv1.bias 32
    ...
"""

from pathlib import Path

import numpy as np

from motionrv.constants import CHECKPOINT_MAGIC, CHECKPOINT_VERSION
from motionrv.errors import DataFormatError
from motionrv.nn.model import CnnModel


def save_checkpoint(model: CnnModel, path: str | Path) -> Path:
    path = Path(path)
    lines = [
        f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION} "
        f"window_len={model.window_len} {model.spec_string()}"
    ]
    for name, value in model.named_parameters().items():
        lines.append(f"{name} {','.join(str(d) for d in value.shape)}")
        lines.append(" ".join(f"{v:.17g}" for v in value.ravel()))
    path.write_text("\n".join(lines) + "\n")
    return path


def load_checkpoint(path: str | Path) -> CnnModel:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as e:
        raise DataFormatError(f"cannot read checkpoint: {e.strerror}",
                              str(path))
    if not lines:
        raise DataFormatError("empty checkpoint", str(path))
    header = lines[0].split(" ")
    if len(header) != 4 or header[0] != CHECKPOINT_MAGIC:
        raise DataFormatError("not a motionrv checkpoint", str(path), 1)
    if header[1] != str(CHECKPOINT_VERSION):
        raise DataFormatError(f"unsupported checkpoint version {header[1]}",
                              str(path), 1)
    if not header[2].startswith("window_len="):
        raise DataFormatError("missing window_len", str(path), 1)
    window_len = int(header[2].split("=", 1)[1])
    model = CnnModel.from_spec_string(header[3], window_len)

    values: dict[str, np.ndarray] = {}
    body = lines[1:]
    if len(body) % 2 != 0:
        raise DataFormatError("truncated parameter block", str(path),
                              len(lines))
    for i in range(0, len(body), 2):
        lineno = i + 2
        name, _, shape_text = body[i].partition(" ")
        try:
            shape = tuple(int(d) for d in shape_text.split(","))
            flat = np.array([float(v) for v in body[i + 1].split()],
                            dtype=np.float64)
        except ValueError:
            raise DataFormatError(f"malformed block for {name}", str(path),
                                  lineno)
        if flat.size != int(np.prod(shape)):
            raise DataFormatError(
                f"{name}: {flat.size} values for shape {shape}", str(path),
                lineno + 1)
        values[name] = flat.reshape(shape)
    try:
        model.load_parameters(values)
    except ValueError as e:
        raise DataFormatError(str(e), str(path))
    return model
