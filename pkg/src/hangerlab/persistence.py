"""On-disk formats.

Everything is JSON with sorted keys.  Arrays are stored as a record with
``dtype``, ``shape``, ``encoding`` and ``data``:

* ``base64``: little-endian raw bytes,
* ``bits``: binary grids packed eight cells per byte, then base64,
* ``text``: a flat list of numbers; floats use ``repr`` so they round-trip
  exactly.

Files are written to a temporary sibling and renamed into place.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .core import (
    Episode,
    EpisodeMeta,
    EpisodeType,
    InvalidArgument,
    Outcome,
    SimConfig,
    Source,
)

FORMAT_VERSION = 1
ENCODINGS = ("base64", "text")


class FormatError(ValueError):
    """A file on disk does not match the expected layout or version."""


# --------------------------------------------------------------------- io


def atomic_write(path: str | os.PathLike, data: str | bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    raw = data.encode() if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(raw)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_json(path, obj) -> None:
    atomic_write(path, dumps(obj) + "\n")


def read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _check_version(d: dict, kind: str) -> None:
    if d.get("kind") != kind:
        raise FormatError(f"expected a {kind!r} record, found {d.get('kind')!r}")
    if d.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {d.get('format_version')!r} for {kind}")


# ----------------------------------------------------------------- arrays


def encode_array(a: np.ndarray, encoding: str = "base64") -> dict:
    a = np.asarray(a)
    dt = a.dtype.newbyteorder("<") if a.dtype.byteorder not in ("|", "<") else a.dtype
    a = a.astype(dt, copy=False)
    rec = {"dtype": dt.str, "shape": list(a.shape)}
    if encoding == "text":
        rec["encoding"] = "text"
        rec["data"] = a.ravel().tolist()
    elif encoding == "base64":
        if a.dtype == np.uint8 and a.size and a.max() <= 1:
            rec["encoding"] = "bits"
            rec["data"] = base64.b64encode(np.packbits(a.ravel()).tobytes()).decode("ascii")
        else:
            rec["encoding"] = "base64"
            rec["data"] = base64.b64encode(np.ascontiguousarray(a).tobytes()).decode("ascii")
    else:
        raise InvalidArgument(f"unknown array encoding {encoding!r}; choose from {ENCODINGS}")
    return rec


def decode_array(rec: dict) -> np.ndarray:
    dt = np.dtype(rec["dtype"])
    shape = tuple(rec["shape"])
    n = int(np.prod(shape, dtype=np.int64))
    enc = rec["encoding"]
    if enc == "text":
        a = np.array(rec["data"], dtype=dt)
    elif enc == "base64":
        a = np.frombuffer(base64.b64decode(rec["data"]), dtype=dt).copy()
    elif enc == "bits":
        a = np.unpackbits(np.frombuffer(base64.b64decode(rec["data"]), dtype=np.uint8), count=n).astype(dt)
    else:
        raise FormatError(f"unknown array encoding {enc!r}")
    if a.size != n:
        raise FormatError(f"array payload has {a.size} values, shape {shape} needs {n}")
    return a.reshape(shape)


# --------------------------------------------------------------- episodes


def meta_to_dict(meta: EpisodeMeta) -> dict:
    return {
        "episode_type": meta.episode_type.value,
        "source": meta.source.value,
        "outcome": meta.outcome.to_str(),
        "seed": int(meta.seed),
        "collar_trace": [[float(x), float(y)] for x, y in meta.collar_trace],
        "shoulder_offset": float(meta.shoulder_offset),
        "initial_pose": [float(v) for v in meta.initial_pose],
        "policy_seed": meta.policy_seed,
        "tag": meta.tag,
    }


def meta_from_dict(d: dict) -> EpisodeMeta:
    return EpisodeMeta(
        episode_type=EpisodeType(d["episode_type"]),
        source=Source(d["source"]),
        outcome=Outcome.from_str(d["outcome"]),
        seed=int(d["seed"]),
        collar_trace=tuple((float(x), float(y)) for x, y in d["collar_trace"]),
        shoulder_offset=float(d["shoulder_offset"]),
        initial_pose=tuple(float(v) for v in d["initial_pose"]),
        policy_seed=d["policy_seed"],
        tag=d["tag"],
    )


_COLUMNS = ("scene", "wrist", "proprio", "instr", "actions", "stages")


def episode_to_dict(ep: Episode, encoding: str = "base64") -> dict:
    arrays = {}
    for name in _COLUMNS:
        a = getattr(ep, name)
        arrays[name] = None if a is None else encode_array(a, encoding)
    return {
        "kind": "episode",
        "format_version": FORMAT_VERSION,
        "meta": meta_to_dict(ep.meta),
        "arrays": arrays,
        "terminal_event": ep.terminal_event,
        "final_covered": [bool(c) for c in ep.final_covered],
    }


def episode_from_dict(d: dict) -> Episode:
    _check_version(d, "episode")
    arr = {k: (None if d["arrays"][k] is None else decode_array(d["arrays"][k])) for k in _COLUMNS}
    return Episode(
        meta=meta_from_dict(d["meta"]),
        terminal_event=d["terminal_event"],
        final_covered=tuple(bool(c) for c in d["final_covered"]),
        **arr,
    )


def episode_hash(ep: Episode) -> str:
    """SHA-256 of the canonical binary serialization."""
    return hashlib.sha256(dumps(episode_to_dict(ep, "base64")).encode()).hexdigest()


def episodes_equal(a: Episode, b: Episode) -> bool:
    """Bit-exact equality of all columns and metadata."""
    if a.meta != b.meta or a.terminal_event != b.terminal_event or a.final_covered != b.final_covered:
        return False
    for name in _COLUMNS:
        x, y = getattr(a, name), getattr(b, name)
        if (x is None) != (y is None):
            return False
        if x is not None and (x.dtype != y.dtype or x.shape != y.shape or x.tobytes() != y.tobytes()):
            return False
    return True


def save_episode(path, ep: Episode, encoding: str = "base64") -> None:
    write_json(path, episode_to_dict(ep, encoding))


def load_episode(path) -> Episode:
    return episode_from_dict(read_json(path))


# --------------------------------------------------------------- datasets


def _prepare_dir(path: Path, overwrite: bool) -> None:
    if path.exists():
        if not overwrite:
            raise FileExistsError(f"{path} exists; pass overwrite to replace it")
        if not path.is_dir():
            raise FileExistsError(f"{path} exists and is not a directory")
    path.mkdir(parents=True, exist_ok=True)


def save_dataset(path, dataset, encoding: str = "base64", overwrite: bool = False) -> Path:
    """Write ``manifest.json`` plus one file per episode under ``episodes/``."""
    path = Path(path)
    _prepare_dir(path, overwrite)
    files = []
    for k, ep in enumerate(dataset.episodes):
        name = f"episodes/ep_{k:05d}.json"
        save_episode(path / name, ep, encoding)
        files.append(name)
    manifest = dict(dataset.manifest)
    manifest.update({"kind": "dataset", "format_version": FORMAT_VERSION, "files": files, "encoding": encoding})
    write_json(path / "manifest.json", manifest)
    return path / "manifest.json"


def load_dataset(path):
    from .expert import Dataset

    path = Path(path)
    manifest = read_json(path / "manifest.json")
    _check_version(manifest, "dataset")
    episodes = [load_episode(path / f) for f in manifest["files"]]
    listed = manifest.get("episodes")
    if listed is not None:
        if len(listed) != len(episodes):
            raise FormatError("manifest episode list disagrees with the files on disk")
        for entry, ep in zip(listed, episodes):
            if entry.get("hash") is not None and entry["hash"] != episode_hash(ep):
                raise FormatError(f"episode {entry.get('index')} does not match its manifest hash")
    body = {k: v for k, v in manifest.items() if k not in ("kind", "format_version", "files", "encoding")}
    return Dataset(episodes, body)


def manifest_hash(path) -> str:
    return hashlib.sha256(Path(path, "manifest.json").read_bytes()).hexdigest()


# ------------------------------------------------------------ checkpoints


def policy_to_dict(policy) -> dict:
    p = policy.params
    return {
        "kind": "checkpoint",
        "format_version": FORMAT_VERSION,
        "tag": policy.tag,
        "step": int(policy.step),
        "policy_config": policy.config.to_dict(),
        "sim_config": policy.sim.to_dict(),
        "input_length": int(p.sizes[0]),
        "obs_length": int(policy.config.obs_dim),
        "schedule": {"T": policy.schedule.T, "betas": encode_array(policy.schedule.betas)},
        "params": {
            "sizes": list(p.sizes),
            "weights": [encode_array(w) for w in p.trunk.weights],
            "biases": [encode_array(b) for b in p.trunk.biases],
            "time_w": encode_array(p.time_w),
            "time_b": encode_array(p.time_b),
            "film_w": [encode_array(w) for w in p.film_w],
            "film_b": [encode_array(b) for b in p.film_b],
        },
        "adam": {
            "t": int(policy.adam.t),
            "m": [encode_array(a) for a in policy.adam.m],
            "v": [encode_array(a) for a in policy.adam.v],
        },
        "rng": policy.rng.bit_generator.state,
    }


def policy_from_dict(d: dict):
    from .learner.diffusion import DiffusionPolicy, PolicyConfig, make_schedule
    from .learner.film import FilmParams
    from .learner.mlp import AdamState, MlpParams

    _check_version(d, "checkpoint")
    cfg = PolicyConfig.from_dict(d["policy_config"])
    sim = SimConfig.from_dict(d["sim_config"])
    pd = d["params"]
    trunk = MlpParams(tuple(pd["sizes"]), [decode_array(w) for w in pd["weights"]],
                      [decode_array(b) for b in pd["biases"]])
    params = FilmParams(trunk, decode_array(pd["time_w"]), decode_array(pd["time_b"]),
                        [decode_array(w) for w in pd["film_w"]], [decode_array(b) for b in pd["film_b"]])
    if params.sizes[0] != cfg.input_dim or d["obs_length"] != cfg.obs_dim:
        raise FormatError("checkpoint input length disagrees with its policy config")
    sched = make_schedule(d["schedule"]["T"])
    if sched.betas.tobytes() != decode_array(d["schedule"]["betas"]).tobytes():
        raise FormatError("stored noise schedule differs from the rebuilt schedule")
    adam = AdamState([decode_array(a) for a in d["adam"]["m"]], [decode_array(a) for a in d["adam"]["v"]],
                     int(d["adam"]["t"]))
    bg = np.random.PCG64()
    bg.state = d["rng"]
    return DiffusionPolicy(cfg, sim, params, sched, adam, np.random.Generator(bg), int(d["step"]), d["tag"])


def save_checkpoint(path, policy) -> None:
    write_json(path, policy_to_dict(policy))


def load_checkpoint(path):
    return policy_from_dict(read_json(path))


# ---------------------------------------------------------- eval records


def save_eval_record(path, record) -> None:
    d = record.to_dict()
    d.update({"kind": "eval_record", "format_version": FORMAT_VERSION})
    write_json(path, d)


def load_eval_record(path):
    from .harness import EvalRecord

    d = read_json(path)
    _check_version(d, "eval_record")
    return EvalRecord.from_dict(d)


# ---------------------------------------------------------------- traces


def traces_to_dict(record) -> dict:
    return {
        "kind": "traces",
        "format_version": FORMAT_VERSION,
        "tag": record.tag,
        "frame": "wrist window, (0, 0) bottom-left, (1, 1) top-right",
        "traces": [
            {"seed": r["seed"], "outcome": r["outcome"],
             "success": Outcome.from_str(r["outcome"]).is_success, "polyline": r["collar_trace"]}
            for r in record.rollouts
        ],
    }


def save_traces(path, record) -> None:
    write_json(path, traces_to_dict(record))


def traces_svg(traces: dict, size: int = 400) -> str:
    """Overlay of all collar traces, green for successes and red for failures."""
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white" stroke="black"/>',
    ]
    for tr in traces["traces"]:
        pts = " ".join(f"{x * size:.2f},{(1.0 - y) * size:.2f}" for x, y in tr["polyline"])
        colour = "#2a9d3a" if tr["success"] else "#d62828"
        lines.append(f'<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="1.5" stroke-opacity="0.7"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
