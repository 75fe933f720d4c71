"""On-disk formats: `.beat` frames, `.rimg` images, `.fcnn` models, `.track`
logs, dataset directories, and benchmark reports.

Binary formats share one layout: a single-line UTF-8 JSON header terminated by
a newline, followed by raw little-endian float32 payload.  Complex payloads
interleave (re, im) pairs; array order is row-major in the declared shape.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .enhancer import ConvLayer, FcnnModel, TrainSet
from .imaging import RadarImage, RoiGrid
from .signal import ArrayGeometry, BeatFrame, ChirpConfig

FORMAT_VERSION = 1


def _write_header(fh, header: dict) -> None:
    fh.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))


def _read_header(fh) -> dict:
    line = bytearray()
    while True:
        ch = fh.read(1)
        if not ch:
            raise ValueError("truncated file: header line not terminated")
        if ch == b"\n":
            break
        line.extend(ch)
    return json.loads(line.decode("utf-8"))


def _complex_to_f32(data: np.ndarray) -> np.ndarray:
    out = np.empty(data.shape + (2,), dtype="<f4")
    out[..., 0] = data.real
    out[..., 1] = data.imag
    return out


def _f32_to_complex(raw: np.ndarray, shape) -> np.ndarray:
    pairs = raw.reshape(tuple(shape) + (2,))
    return (pairs[..., 0] + 1j * pairs[..., 1]).astype(np.complex128)


def config_to_dict(config: ChirpConfig) -> dict:
    return {
        "start_freq_hz": config.start_freq,
        "slope_hz_per_s": config.slope,
        "adc_rate_hz": config.adc_rate,
        "samples_per_chirp": config.n_samples,
        "chirps_per_frame": config.n_chirps,
        "pri_s": config.pri,
    }


def config_from_dict(d: dict) -> ChirpConfig:
    return ChirpConfig(start_freq=d["start_freq_hz"], slope=d["slope_hz_per_s"],
                       adc_rate=d["adc_rate_hz"], n_samples=d["samples_per_chirp"],
                       n_chirps=d["chirps_per_frame"], pri=d["pri_s"])


def geometry_to_dict(geometry: ArrayGeometry) -> dict:
    return {"tx_y_m": list(geometry.tx_y), "rx_y_m": list(geometry.rx_y),
            "ref_range_m": geometry.ref_range}


def geometry_from_dict(d: dict) -> ArrayGeometry:
    return ArrayGeometry(tx_y=tuple(d["tx_y_m"]), rx_y=tuple(d["rx_y_m"]),
                         ref_range=d["ref_range_m"])


def grid_to_dict(grid: RoiGrid) -> dict:
    return {"y_min_m": grid.y_min, "y_max_m": grid.y_max,
            "z_min_m": grid.z_min, "z_max_m": grid.z_max,
            "ny": grid.n_y, "nz": grid.n_z}


def grid_from_dict(d: dict) -> RoiGrid:
    return RoiGrid(y_min=d["y_min_m"], y_max=d["y_max_m"], z_min=d["z_min_m"],
                   z_max=d["z_max_m"], n_y=d["ny"], n_z=d["nz"])


# ---------------------------------------------------------------------------
# .beat

def write_beat(path, frame: BeatFrame) -> None:
    header = {
        "format": "beat",
        "version": FORMAT_VERSION,
        "config": config_to_dict(frame.config),
        "geometry": geometry_to_dict(frame.geometry),
        "layout": frame.layout,
        "shape": list(frame.data.shape),
        "time_s": frame.time,
        "dtype": "complex64-interleaved-le",
    }
    with open(path, "wb") as fh:
        _write_header(fh, header)
        fh.write(_complex_to_f32(frame.data).tobytes())


def read_beat(path) -> BeatFrame:
    with open(path, "rb") as fh:
        header = _read_header(fh)
        if header.get("format") != "beat":
            raise ValueError(f"{path} is not a .beat file")
        raw = np.frombuffer(fh.read(), dtype="<f4")
    shape = header["shape"]
    expected = int(np.prod(shape)) * 2
    if raw.size != expected:
        raise ValueError(f"{path}: payload holds {raw.size} floats, expected {expected}")
    return BeatFrame(data=_f32_to_complex(raw, shape),
                     config=config_from_dict(header["config"]),
                     geometry=geometry_from_dict(header["geometry"]),
                     layout=header["layout"],
                     time=header.get("time_s", 0.0))


# ---------------------------------------------------------------------------
# .rimg

def write_rimg(path, image: RadarImage) -> None:
    is_complex = np.iscomplexobj(image.pixels)
    header = {
        "format": "rimg",
        "version": FORMAT_VERSION,
        "grid": grid_to_dict(image.grid),
        "shape": list(image.pixels.shape),
        "time_s": image.time,
        "pixel_format": "complex" if is_complex else "real",
        "dtype": ("complex64-interleaved-le" if is_complex else "float32-le"),
    }
    with open(path, "wb") as fh:
        _write_header(fh, header)
        if is_complex:
            fh.write(_complex_to_f32(image.pixels).tobytes())
        else:
            fh.write(image.pixels.astype("<f4").tobytes())


def read_rimg(path) -> RadarImage:
    with open(path, "rb") as fh:
        header = _read_header(fh)
        if header.get("format") != "rimg":
            raise ValueError(f"{path} is not a .rimg file")
        raw = np.frombuffer(fh.read(), dtype="<f4")
    shape = header["shape"]
    n = int(np.prod(shape))
    if header["pixel_format"] == "complex":
        if raw.size != 2 * n:
            raise ValueError(f"{path}: bad payload size")
        pixels = _f32_to_complex(raw, shape)
    else:
        if raw.size != n:
            raise ValueError(f"{path}: bad payload size")
        pixels = raw.reshape(shape).astype(np.float64)
    return RadarImage(pixels=pixels, grid=grid_from_dict(header["grid"]),
                      time=header.get("time_s", 0.0))


# ---------------------------------------------------------------------------
# .fcnn

def write_model(path, model: FcnnModel) -> None:
    header = {
        "format": "fcnn",
        "version": FORMAT_VERSION,
        "architecture": model.architecture(),
        "tensors": [
            {"name": f"layer{i}.{n}", "shape": list(t.shape)}
            for i, layer in enumerate(model.layers)
            for n, t in (("weights", layer.weights), ("bias", layer.bias))
        ],
    }
    with open(path, "wb") as fh:
        _write_header(fh, header)
        for layer in model.layers:
            fh.write(layer.weights.astype("<f4").tobytes())
            fh.write(layer.bias.astype("<f4").tobytes())


def read_model(path) -> FcnnModel:
    with open(path, "rb") as fh:
        header = _read_header(fh)
        if header.get("format") != "fcnn":
            raise ValueError(f"{path} is not a .fcnn model file")
        raw = np.frombuffer(fh.read(), dtype="<f4")
    arch = header["architecture"]
    dtype = np.dtype(arch.get("dtype", "float32"))
    tensors = []
    offset = 0
    for spec in header["tensors"]:
        n = int(np.prod(spec["shape"]))
        tensors.append(raw[offset:offset + n].reshape(spec["shape"]))
        offset += n
    if offset != raw.size:
        raise ValueError(f"{path}: trailing bytes in payload")
    layers = []
    n_layers = len(tensors) // 2
    for i in range(n_layers):
        relu = arch["final_relu"] if i == n_layers - 1 else True
        layers.append(ConvLayer(tensors[2 * i].astype(dtype),
                                tensors[2 * i + 1].astype(dtype), relu=relu))
    return FcnnModel(layers)


def model_summary(path) -> dict:
    with open(path, "rb") as fh:
        header = _read_header(fh)
    if header.get("format") != "fcnn":
        raise ValueError(f"{path} is not a .fcnn model file")
    return header


# ---------------------------------------------------------------------------
# dataset directories

def write_dataset(directory, train_set: TrainSet) -> None:
    """Feature/label .rimg pairs plus a manifest.json index."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(len(train_set)):
        feat = f"pair{i:05d}_feature.rimg"
        lab = f"pair{i:05d}_label.rimg"
        write_rimg(directory / feat,
                   RadarImage(train_set.features[i].astype(np.float64),
                              train_set.grid))
        write_rimg(directory / lab,
                   RadarImage(train_set.labels[i].astype(np.float64),
                              train_set.grid))
        entries.append({"feature": feat, "label": lab,
                        "provenance": train_set.provenance[i],
                        "center_m": [float(train_set.centers[i][0]),
                                     float(train_set.centers[i][1])]})
    manifest = {"format": "handwave-dataset", "version": FORMAT_VERSION,
                "grid": grid_to_dict(train_set.grid), "pairs": entries}
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))


def read_dataset(directory) -> TrainSet:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    if manifest.get("format") != "handwave-dataset":
        raise ValueError(f"{directory} is not a dataset directory")
    grid = grid_from_dict(manifest["grid"])
    feats, labs, prov, centers = [], [], [], []
    for entry in manifest["pairs"]:
        feats.append(read_rimg(directory / entry["feature"]).pixels)
        labs.append(read_rimg(directory / entry["label"]).pixels)
        prov.append(entry["provenance"])
        centers.append(entry["center_m"])
    return TrainSet(np.asarray(feats, dtype=np.float32),
                    np.asarray(labs, dtype=np.float32),
                    prov, grid, np.asarray(centers, dtype=float))


# ---------------------------------------------------------------------------
# .track logs (JSON lines)

TRACK_FIELDS = ("t", "measured_y", "measured_z", "est_y", "est_z",
                "doppler_vel", "sample_vel", "est_vel", "range_gain", "osc_rate")


def write_track(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps({k: rec[k] for k in TRACK_FIELDS}) + "\n")


def read_track(path) -> list:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


# ---------------------------------------------------------------------------
# bench reports

def write_report(path, report: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_report(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def inspect(path) -> dict:
    """Header/summary of any handwave file, keyed by extension."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in (".beat", ".rimg", ".fcnn"):
        with open(path, "rb") as fh:
            return _read_header(fh)
    if suffix == ".track":
        records = read_track(path)
        return {"format": "track", "records": len(records),
                "first": records[0] if records else None,
                "last": records[-1] if records else None}
    if suffix == ".json":
        data = json.loads(path.read_text())
        if isinstance(data, dict) and data.get("format") == "handwave-dataset":
            return {"format": "handwave-dataset", "pairs": len(data["pairs"])}
        return {"format": "json", "keys": sorted(data)} if isinstance(data, dict) \
            else {"format": "json"}
    if path.is_dir() and (path / "manifest.json").exists():
        manifest = json.loads((path / "manifest.json").read_text())
        return {"format": manifest.get("format"), "pairs": len(manifest.get("pairs", []))}
    raise ValueError(f"don't know how to inspect {path}")
