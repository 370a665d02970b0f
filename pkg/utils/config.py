import logging
import os
from fractions import Fraction
from pathlib import Path
from urllib.parse import urlparse

import numpy as np
import yaml
from pydantic import BaseModel, NonNegativeInt, PositiveFloat, PositiveInt

LOGGER = logging.getLogger(__name__)

REPO_CONF_DIR = Path(__file__).resolve().parent.parent / "conf" / "base"


class CompilerDefaults(BaseModel):
    k_lut: PositiveInt = 6
    input_bits: PositiveInt = 12
    fan_in_cap: PositiveInt = 20
    phi_max: PositiveInt = 12
    budget_luts: PositiveInt = 8000
    score_threshold: PositiveFloat | None = 5.0
    top: PositiveInt | None = None
    seed: NonNegativeInt = 0
    verify_count: NonNegativeInt = 1000
    window_length: PositiveInt = 64
    n_jobs: int = 1


def conf_dir() -> Path:
    """
    Resolve the configuration directory.
    Priority: LUTNET_CONF_DIR env var → repository conf/base
    """
    override = os.getenv("LUTNET_CONF_DIR")
    return Path(override) if override else REPO_CONF_DIR


def load_compiler_defaults() -> CompilerDefaults:
    """
    Read compiler_defaults.yml from the configuration directory.
    Missing keys fall back to built-in values; unknown keys are ignored with a warning.
    """
    path = conf_dir() / "compiler_defaults.yml"
    raw = {}
    if path.exists():
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f) or {}
    else:
        LOGGER.warning("no compiler defaults at %s, using built-in values", path)

    known = set(CompilerDefaults.model_fields)
    for key in sorted(set(raw) - known):
        LOGGER.warning("ignoring unknown configuration key %r in %s", key, path)
    return CompilerDefaults(**{k: v for k, v in raw.items() if k in known})


def get_api_base_url() -> str:
    """
    Base URL of the model service the dashboard talks to.
    Looked up in st.secrets, then the LUTNET_API_BASE_URL env var, then the local uvicorn address.
    With ENV=production a loopback host is refused.
    """
    api_url = None

    try:
        import streamlit as st
        api_url = st.secrets.get("LUTNET_API_BASE_URL")
    except (ImportError, FileNotFoundError, KeyError):
        pass

    if not api_url:
        api_url = os.getenv("LUTNET_API_BASE_URL")

    if not api_url:
        api_url = "http://127.0.0.1:8000"

    env = os.getenv("ENV", "local")

    if env == "production":
        parsed = urlparse(api_url)
        if parsed.hostname in {"localhost", "127.0.0.1"}:
            raise RuntimeError(
                f"LUTNET_API_BASE_URL points at {parsed.hostname} while ENV=production."
            )
    LOGGER.debug("api_url: %s", api_url)
    return api_url


def normalize_params(params: dict) -> dict:
    """
    Convert a report dict into JSON-safe Python primitives, recursively.
    - numpy integers → int, numpy floats → float
    - Fractions → "p/q" strings
    - NaN / inf → None
    """
    return {k: _normalize(v) for k, v in params.items()}


def _normalize(v):
    if isinstance(v, dict):
        return normalize_params(v)
    if isinstance(v, (list, tuple)):
        return [_normalize(x) for x in v]
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if np.isfinite(v) else None
    if isinstance(v, np.ndarray):
        return _normalize(v.tolist())
    return v
