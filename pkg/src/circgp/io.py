"""File formats: dataset CSV, run configuration, chain files.

Every CSV written here starts with one comment line
``# circgp <version> config_hash=<hash>`` followed by a header row.
Floats are written with 17 significant digits so a save/load cycle is
lossless. Files are written to a temporary sibling and renamed into place.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .dataset import Dataset
from .errors import ConfigurationError
from .mcmc import Chain, McmcConfig
from .priors import PriorConfig

REQUIRED_COLUMNS = ("site_id", "x_km", "y_km", "t")
MODELS = ("WN", "PN", "WNA", "WNR", "PNA", "PNR")


def fmt(v) -> str:
    """Round-trip float formatting."""
    return format(float(v), ".17g")


def config_hash(obj) -> str:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def header_comment(chash="") -> str:
    return f"# circgp {__version__} config_hash={chash}\n"


def atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows, chash=""):
    buf = _io.StringIO()
    buf.write(header_comment(chash))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    atomic_write(path, buf.getvalue())


def read_csv(path):
    """``(comment_lines, header, rows_with_line_numbers)``."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"{path}: no such file")
    comments, header, rows = [], None, []
    with open(path, newline="") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            if line.startswith("#"):
                comments.append(line[1:].strip())
                continue
            fields = next(csv.reader([line]))
            if header is None:
                header = [h.strip() for h in fields]
            else:
                rows.append((lineno, [v.strip() for v in fields]))
    if header is None:
        raise ConfigurationError(f"{path}: missing header row")
    return comments, header, rows


def comment_hash(comments) -> str | None:
    for c in comments:
        for tok in c.split():
            if tok.startswith("config_hash="):
                return tok.split("=", 1)[1]
    return None


# ----------------------------------------------------------------------
def _is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def load_dataset(path, require_angles=True, factor_levels=None) -> Dataset:
    """Read a dataset CSV.

    Columns ``site_id, x_km, y_km, t`` are required, plus the angle as
    ``theta_rad`` or ``theta_deg`` (unless ``require_angles`` is false, for
    target files). Other columns become covariates when every value is
    numeric and factors otherwise. ``factor_levels`` maps a factor name to
    its allowed levels.
    """
    _, header, rows = read_csv(path)
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    angle_cols = [c for c in ("theta_rad", "theta_deg") if c in header]
    if require_angles and not angle_cols:
        missing.append("theta_rad")
    if missing:
        raise ConfigurationError(f"{path}: missing columns: {', '.join(missing)}")
    if len(angle_cols) > 1:
        raise ConfigurationError(f"{path}: give theta_rad or theta_deg, not both")
    if len(set(header)) != len(header):
        raise ConfigurationError(f"{path}: duplicate column names")
    col = {h: i for i, h in enumerate(header)}
    extra = [h for h in header if h not in REQUIRED_COLUMNS and h not in angle_cols]
    factor_levels = dict(factor_levels or {})
    numeric = {h: h not in factor_levels and all(_is_number(r[col[h]]) for _, r in rows if len(r) == len(header)) for h in extra}

    n = len(rows)
    pts = np.empty((n, 3))
    theta = np.zeros(n)
    sites = []
    cov = {h: np.empty(n) for h in extra if numeric[h]}
    fac = {h: [] for h in extra if not numeric[h]}
    for i, (lineno, r) in enumerate(rows):
        if len(r) != len(header):
            raise ConfigurationError(f"{path}:{lineno}: expected {len(header)} fields, got {len(r)}")
        try:
            x, y, t = float(r[col["x_km"]]), float(r[col["y_km"]]), float(r[col["t"]])
            ang = float(r[col[angle_cols[0]]]) if angle_cols else 0.0
            for h in cov:
                cov[h][i] = float(r[col[h]])
        except ValueError as exc:
            raise ConfigurationError(f"{path}:{lineno}: {exc}") from None
        if not all(math.isfinite(v) for v in (x, y, t, ang)):
            raise ConfigurationError(f"{path}:{lineno}: non-finite value in a required column")
        if t < 0 or t != int(t):
            raise ConfigurationError(f"{path}:{lineno}: t must be a non-negative integer, got {r[col['t']]}")
        if r[col["site_id"]] == "":
            raise ConfigurationError(f"{path}:{lineno}: empty site_id")
        for h in fac:
            level = r[col[h]]
            if h in factor_levels and level not in factor_levels[h]:
                raise ConfigurationError(f"{path}:{lineno}: unknown level {level!r} for factor {h}")
            fac[h].append(level)
        pts[i] = (x, y, t)
        theta[i] = math.radians(ang) if angle_cols == ["theta_deg"] else ang
        sites.append(r[col["site_id"]])
    return Dataset(pts, theta, np.array(sites), cov, {h: np.array(v) for h, v in fac.items()})


def write_dataset(path, dataset: Dataset, chash=""):
    cov = list(dataset.covariates)
    fac = list(dataset.factors)
    header = ["site_id", "x_km", "y_km", "t", "theta_rad"] + cov + fac
    rows = []
    for i in range(len(dataset)):
        x, y, t = dataset.points[i]
        rows.append(
            [dataset.site_id[i], fmt(x), fmt(y), int(t), fmt(dataset.angles[i])]
            + [fmt(dataset.covariates[c][i]) for c in cov]
            + [dataset.factors[f][i] for f in fac]
        )
    write_csv(path, header, rows, chash)


# ----------------------------------------------------------------------
_TOP_KEYS = {"model", "priors", "mcmc", "k_max", "design", "truth", "grid", "split"}
_MCMC_KEYS = {"iterations", "burn_in", "thin", "seed", "adapt", "target_accept"}


@dataclass
class RunConfig:
    """Parsed run configuration (TOML).

    ``model`` is one of WN, PN, WNA, WNR, PNA, PNR. ``priors`` maps parameter
    or group names to shorthand strings. ``k_max`` is ``"auto"`` or an
    integer. ``factors`` and ``covariates`` name dataset columns used by the
    covariate variants.
    """

    model: str
    priors: PriorConfig
    mcmc: McmcConfig
    seed: int | None = None
    factors: tuple = ()
    covariates: tuple = ()
    raw: dict = field(default_factory=dict)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def parse_run_config(raw: dict) -> RunConfig:
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigurationError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
    model = raw.get("model")
    if model not in MODELS:
        raise ConfigurationError(f"model must be one of {', '.join(MODELS)}, got {model!r}")
    priors = raw.get("priors")
    if not isinstance(priors, dict) or not priors:
        raise ConfigurationError("a [priors] table is required")
    m = dict(raw.get("mcmc", {}))
    unknown = set(m) - _MCMC_KEYS
    if unknown:
        raise ConfigurationError(f"unknown mcmc keys: {', '.join(sorted(unknown))}")
    seed = m.pop("seed", None)
    k_max = raw.get("k_max", "auto")
    if k_max != "auto" and not (isinstance(k_max, int) and k_max >= 1):
        raise ConfigurationError("k_max must be 'auto' or a positive integer")
    mcmc = McmcConfig(**m, k_max=None if k_max == "auto" else k_max)
    design = dict(raw.get("design", {}))
    unknown = set(design) - {"factors", "covariates"}
    if unknown:
        raise ConfigurationError(f"unknown design keys: {', '.join(sorted(unknown))}")
    return RunConfig(
        model, PriorConfig(dict(priors)), mcmc, seed,
        tuple(design.get("factors", ())), tuple(design.get("covariates", ())), raw,
    )


def load_toml(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"{path}: no such file")
    try:
        with open(path, "rb") as f:
            return tomllib.load(f)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None


def load_run_config(path) -> RunConfig:
    return parse_run_config(load_toml(path))


# ----------------------------------------------------------------------
def _meta_path(path):
    return Path(str(path) + ".meta.json")


def _latent_path(path):
    p = Path(path)
    return p.with_name(p.stem + ".latent" + p.suffix)


def save_chain(path, chain: Chain, chash="", save_latent=False):
    """Write draws, the metadata companion and optionally the latent states."""
    names = chain.names
    rows = [[fmt(chain.params[k][i]) for k in names] for i in range(chain.n_draws)]
    write_csv(path, names, rows, chash)
    latent_file = None
    if save_latent and chain.latent is not None:
        lp = _latent_path(path)
        integer = np.issubdtype(chain.latent.dtype, np.integer)
        lrows = [[str(int(v)) if integer else fmt(v) for v in row] for row in chain.latent]
        write_csv(lp, [f"obs_{j}" for j in range(chain.latent.shape[1])], lrows, chash)
        latent_file = lp.name
    meta = {
        "version": __version__,
        "config_hash": chash,
        "model": chain.model,
        "names": names,
        "circular": list(chain.circular),
        "n_draws": chain.n_draws,
        "acceptance": chain.acceptance,
        "mcmc": asdict(chain.config) if chain.config else None,
        "seed": chain.seed,
        "info": chain.info,
        "latent_file": latent_file,
        "latent_kind": None if latent_file is None else str(chain.latent.dtype),
    }
    atomic_write(_meta_path(path), json.dumps(meta, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def load_chain(path, expected_hash=None) -> Chain:
    """Read a chain file; checks draw count and, if given, the config hash."""
    meta_file = _meta_path(path)
    if not meta_file.exists():
        raise ConfigurationError(f"{path}: metadata file {meta_file.name} is missing")
    meta = json.loads(meta_file.read_text())
    comments, header, rows = read_csv(path)
    if header != meta["names"]:
        raise ConfigurationError(f"{path}: columns do not match the metadata")
    if len(rows) != meta["n_draws"]:
        raise ConfigurationError(f"{path}: {len(rows)} draws, metadata says {meta['n_draws']}")
    if meta.get("mcmc") and len(rows) != McmcConfig(**meta["mcmc"]).n_retained:
        raise ConfigurationError(f"{path}: draw count does not match the configured retained draws")
    chash = comment_hash(comments)
    if chash != meta["config_hash"]:
        raise ConfigurationError(f"{path}: config hash differs from its metadata")
    if expected_hash is not None and chash != expected_hash:
        raise ConfigurationError(f"{path}: config hash {chash} does not match {expected_hash}")
    data = np.array([[float(v) for v in r] for _, r in rows], dtype=float).reshape(len(rows), len(header))
    params = {k: data[:, j].copy() for j, k in enumerate(header)}
    latent = None
    if meta.get("latent_file"):
        lp = Path(path).with_name(meta["latent_file"])
        _, lh, lrows = read_csv(lp)
        dtype = np.int64 if "int" in meta["latent_kind"] else float
        latent = np.array([[float(v) for v in r] for _, r in lrows]).reshape(len(lrows), len(lh)).astype(dtype)
    return Chain(
        model=meta["model"],
        params=params,
        latent=latent,
        circular=tuple(meta["circular"]),
        acceptance=meta["acceptance"],
        config=McmcConfig(**meta["mcmc"]) if meta.get("mcmc") else None,
        seed=meta["seed"],
        info=dict(meta["info"]),
    )
