import json
import os
import re
from datetime import date, datetime

import numpy as np
import pandas as pd


def ensure_directory(path):
    if not os.path.exists(path):
        os.makedirs(path)


def to_date(value):
    """Coerce a YAML/JSON/CLI value to datetime.date (expects '%Y-%m-%d' for strings)."""
    if isinstance(value, datetime):
        return value.date()
    if isinstance(value, date):
        return value
    if isinstance(value, pd.Timestamp):
        return value.date()
    return datetime.strptime(str(value).strip(), "%Y-%m-%d").date()


def sector_slug(name):
    slug = re.sub(r"[^a-z0-9]+", "_", str(name).lower()).strip("_")
    return slug or "sector"


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        # JSON has no NaN
        return None if np.isnan(f) else f
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (date, datetime, pd.Timestamp)):
        return obj.strftime("%Y-%m-%d")
    return obj


def write_json(obj, path):
    """Write a JSON document; output is byte-identical for identical inputs."""
    folder = os.path.dirname(path)
    if folder:
        ensure_directory(folder)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_to_jsonable(obj), f, indent=2)
        f.write("\n")
    return path


def read_json(path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)
