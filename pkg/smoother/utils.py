import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .modules.model import Curve, FunctionalDataset

LONG_COLUMNS = ['curve_id', 't', 'y']
FLOAT_FORMAT = '%.17g'


class DataError(ValueError):
    """Input data could not be read or does not form a valid dataset."""


@dataclass(frozen=True)
class TruthBundle:
    truth: FunctionalDataset
    grid: np.ndarray
    mean: np.ndarray
    covariance: np.ndarray
    noise_variance: float = None


def atomic_write(path, content):
    """Write text or bytes to path via a temp file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = 'wb' if isinstance(content, bytes) else 'w'
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f'.{path.name}.', suffix='.tmp')
    try:
        with os.fdopen(fd, mode, **({} if mode == 'wb' else {'newline': '', 'encoding': 'utf-8'})) as f:
            f.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def to_jsonable(value):
    """numpy-aware conversion; non-finite floats become null."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def write_json(path, payload):
    atomic_write(path, json.dumps(to_jsonable(payload), sort_keys=True, indent=2) + '\n')


def read_json(path):
    with open(path, encoding='utf-8') as f:
        return json.load(f)


def write_frame(path, frame):
    atomic_write(path, frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator='\n'))


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()


def dataset_to_frame(data: FunctionalDataset, values=None):
    values = values if values is not None else [curve.values for curve in data.curves]
    return pd.DataFrame({
        'curve_id': np.concatenate([[curve.curve_id] * curve.p for curve in data.curves]),
        't': np.concatenate([curve.grid for curve in data.curves]),
        'y': np.concatenate(values),
    }, columns=LONG_COLUMNS)


def write_long_csv(path, data: FunctionalDataset, values=None):
    write_frame(path, dataset_to_frame(data, values))


def read_long_csv(path, domain=None) -> FunctionalDataset:
    """Read `curve_id,t,y` rows; curves keep first-appearance order, points are sorted by t."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"Data file not found: {path}")
    try:
        frame = pd.read_csv(path, dtype={'curve_id': str})
    except pd.errors.EmptyDataError:
        raise DataError(f"Data file {path} is empty")
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise DataError(f"Data file {path} could not be parsed: {exc}")

    missing = [column for column in LONG_COLUMNS if column not in frame.columns]
    if missing:
        raise DataError(f"Data file {path} lacks column(s): {', '.join(missing)}")
    if frame.empty:
        raise DataError(f"Data file {path} has a header but no observations")

    for column in ('t', 'y'):
        frame[column] = pd.to_numeric(frame[column], errors='coerce')
    if frame[['t', 'y']].isna().any().any() or frame['curve_id'].isna().any():
        raise DataError(f"Data file {path} has missing or non-numeric entries")

    try:
        curves = tuple(
            Curve(curve_id=curve_id, grid=group['t'].to_numpy(), values=group['y'].to_numpy())
            for curve_id, group in (
                (cid, g.sort_values('t', kind='stable')) for cid, g in frame.groupby('curve_id', sort=False)
            )
        )
        return FunctionalDataset(curves=curves, domain=domain)
    except ValueError as exc:
        raise DataError(f"Data file {path}: {exc}")


def write_truth(out_dir, truth: FunctionalDataset, grid, mean, covariance):
    out_dir = Path(out_dir)
    write_long_csv(out_dir / 'truth.csv', truth)
    write_frame(out_dir / 'truth_mean.csv', pd.DataFrame({'t': grid, 'mean': mean}))
    s, t = np.meshgrid(grid, grid, indexing='ij')
    write_frame(out_dir / 'truth_cov.csv', pd.DataFrame({
        's': s.ravel(),
        't': t.ravel(),
        'cov': np.asarray(covariance).ravel(),
    }))


def read_truth(truth_dir) -> TruthBundle:
    truth_dir = Path(truth_dir)
    mean_frame = pd.read_csv(truth_dir / 'truth_mean.csv')
    cov_frame = pd.read_csv(truth_dir / 'truth_cov.csv')
    grid = mean_frame['t'].to_numpy()
    G = grid.size
    if len(cov_frame) != G * G:
        raise DataError(f"truth_cov.csv holds {len(cov_frame)} entries, expected {G * G}")

    manifest_path = truth_dir / 'manifest.json'
    noise_variance = None
    domain = None
    if manifest_path.exists():
        design = read_json(manifest_path).get('design', {})
        if 'noise_sd' in design:
            noise_variance = design['noise_sd'] ** 2
        domain = design.get('domain')

    return TruthBundle(
        truth=read_long_csv(truth_dir / 'truth.csv', domain=domain),
        grid=grid,
        mean=mean_frame['mean'].to_numpy(),
        covariance=cov_frame['cov'].to_numpy().reshape(G, G),
        noise_variance=noise_variance,
    )
