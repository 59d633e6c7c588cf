"""Binary checkpoints for dual pairs and score nets.

Little-endian layout, float64 arrays written raw in layer order so files
round-trip bit-exactly.  Dual pairs carry magic ``SCNS``; score nets reuse
the same MLP block under magic ``SCRN``.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from . import nets
from .dual import DualPair
from .fdiv import Compatibility
from .score_est import ScoreNet

MAGIC_DUAL = b"SCNS"
MAGIC_SCORE = b"SCRN"
VERSION = 1


class CheckpointError(RuntimeError):
    pass


def _write_str(fh, s: str):
    raw = s.encode("utf-8")
    fh.write(struct.pack("<B", len(raw)))
    fh.write(raw)


def _read_str(fh) -> str:
    (n,) = struct.unpack("<B", fh.read(1))
    return fh.read(n).decode("utf-8")


def _write_mlp(fh, spec: nets.MlpSpec, params: nets.MlpParams):
    fh.write(struct.pack("<I", len(spec.widths)))
    fh.write(struct.pack(f"<{len(spec.widths)}I", *spec.widths))
    _write_str(fh, spec.output_activation)
    for w, b in zip(params.weights, params.biases):
        fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def _read_mlp(fh):
    (nw,) = struct.unpack("<I", fh.read(4))
    widths = struct.unpack(f"<{nw}I", fh.read(4 * nw))
    act = _read_str(fh)
    spec = nets.MlpSpec(tuple(widths), act)
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        wbytes = fh.read(8 * fan_in * fan_out)
        bbytes = fh.read(8 * fan_out)
        weights.append(np.frombuffer(wbytes, dtype="<f8").reshape(fan_out, fan_in).copy())
        biases.append(np.frombuffer(bbytes, dtype="<f8").copy())
    return spec, nets.MlpParams(weights, biases, "loaded", None)


def _check_header(fh, magic: bytes, path):
    got = fh.read(4)
    if got != magic:
        raise CheckpointError(f"{path}: bad magic {got!r}, expected {magic!r}")
    (version,) = struct.unpack("<I", fh.read(4))
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}, "
                              f"this build reads version {VERSION}")


def save_dual_pair(path, pair: DualPair):
    with open(path, "wb") as fh:
        fh.write(MAGIC_DUAL)
        fh.write(struct.pack("<I", VERSION))
        _write_str(fh, pair.compat.kind.tag)
        fh.write(struct.pack("<d", pair.compat.lam))
        alpha = pair.compat.params.chi2_softplus_alpha
        fh.write(struct.pack("<Bd", alpha is not None, alpha or 0.0))
        _write_str(fh, pair.cost)
        _write_mlp(fh, pair.phi_spec, pair.phi)
        _write_mlp(fh, pair.psi_spec, pair.psi)


def load_dual_pair(path) -> DualPair:
    with open(path, "rb") as fh:
        _check_header(fh, MAGIC_DUAL, path)
        tag = _read_str(fh)
        (lam,) = struct.unpack("<d", fh.read(8))
        has_alpha, alpha = struct.unpack("<Bd", fh.read(9))
        cost = _read_str(fh)
        phi_spec, phi = _read_mlp(fh)
        psi_spec, psi = _read_mlp(fh)
    compat = Compatibility.from_config(
        {"kind": tag, "lambda": lam,
         "chi2_softplus_alpha": alpha if has_alpha else None})
    return DualPair(phi_spec, phi, psi_spec, psi, compat, cost)


def save_score_net(path, net: ScoreNet):
    with open(path, "wb") as fh:
        fh.write(MAGIC_SCORE)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", net.levels.shape[0]))
        fh.write(np.ascontiguousarray(net.levels, dtype="<f8").tobytes())
        _write_mlp(fh, net.spec, net.params)


def load_score_net(path) -> ScoreNet:
    with open(path, "rb") as fh:
        _check_header(fh, MAGIC_SCORE, path)
        (nl,) = struct.unpack("<I", fh.read(4))
        levels = np.frombuffer(fh.read(8 * nl), dtype="<f8").copy()
        spec, params = _read_mlp(fh)
    return ScoreNet(spec, params, levels)


def dual_pair_files_equal(a, b) -> bool:
    return Path(a).read_bytes() == Path(b).read_bytes()
