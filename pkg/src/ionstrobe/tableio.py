"""Bit-stable tabular text output and decode-table serialization.

Every table is plain whitespace-separated text: a comment header naming
the columns (units embedded in the names), numeric rows at 12 significant
digits, and a comment footer carrying the seed, the config hash, and the
full effective config as a YAML block. Identical config and seed produce
byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import yaml

from .calibrate import DecodeTables
from .errors import ConfigError

DECODE_TABLE_FORMAT = "ionstrobe-decode-tables v1"


def format_number(value) -> str:
    return f"{float(value):.12g}"


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def config_echo_lines(config: dict) -> list[str]:
    dumped = yaml.safe_dump(config, sort_keys=True, default_flow_style=False)
    return ["# config:"] + [f"#   {line}" for line in dumped.rstrip("\n").split("\n")]


def write_table(
    path,
    title: str,
    columns: list[str],
    rows,
    config: dict,
    seed: int,
    summary_lines: list[str] | None = None,
) -> None:
    lines = [f"# {title}", f"# columns: {' '.join(columns)}"]
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row width {len(row)} does not match {len(columns)} columns")
        lines.append(" ".join(format_number(v) for v in row))
    for extra in summary_lines or []:
        lines.append(f"# {extra}")
    lines.append(f"# config_hash: {config_hash(config)}")
    lines.append(f"# seed: {seed:d}")
    lines.extend(config_echo_lines(config))
    Path(path).write_text("\n".join(lines) + "\n")


def read_table(path) -> tuple[list[str], np.ndarray, dict]:
    """Parse a table written by write_table: (columns, rows, metadata)."""
    columns: list[str] = []
    rows: list[list[float]] = []
    meta: dict = {"summary": []}
    config_lines: list[str] = []
    in_config = False
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            body = line[1:].strip()
            if in_config:
                config_lines.append(line[len("#   ") :] if line.startswith("#   ") else body)
                continue
            if "title" not in meta:
                meta["title"] = body
            elif body.startswith("columns:"):
                columns = body.split(":", 1)[1].split()
            elif body.startswith("config_hash:"):
                meta["config_hash"] = body.split(":", 1)[1].strip()
            elif body.startswith("seed:"):
                meta["seed"] = int(body.split(":", 1)[1])
            elif body == "config:":
                in_config = True
            else:
                meta["summary"].append(body)
        elif line.strip():
            rows.append([float(v) for v in line.split()])
    if config_lines:
        meta["config"] = yaml.safe_load("\n".join(config_lines))
    data = np.asarray(rows, dtype=float) if rows else np.empty((0, len(columns)))
    return columns, data, meta


def write_decode_tables(tables: DecodeTables, path, config: dict | None = None) -> None:
    """Serialize decode tables to the versioned text format.

    Sections: `position` with columns (x_m, phi0_rad) and `momentum` with
    columns (p_kgms, contrast).
    """
    cfg = config if config is not None else tables.build_config
    lines = [
        f"# {DECODE_TABLE_FORMAT}",
        f"# config_hash: {config_hash(cfg)}",
        "# section: position",
        "# columns: x_m phi0_rad",
    ]
    for x, phi in zip(tables.pos_x, tables.pos_phi0):
        lines.append(f"{format_number(x)} {format_number(phi)}")
    lines.append("# section: momentum")
    lines.append("# columns: p_kgms contrast")
    for p, c in zip(tables.mom_p, tables.mom_c):
        lines.append(f"{format_number(p)} {format_number(c)}")
    lines.extend(config_echo_lines(cfg))
    Path(path).write_text("\n".join(lines) + "\n")


def read_decode_tables(path) -> tuple[DecodeTables, str]:
    """Load decode tables; returns (tables, stored config hash)."""
    section = None
    stored_hash = ""
    pos: list[list[float]] = []
    mom: list[list[float]] = []
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith(f"# {DECODE_TABLE_FORMAT}"):
        raise ConfigError(f"{path} is not a {DECODE_TABLE_FORMAT} file")
    for line in text[1:]:
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("section:"):
                section = body.split(":", 1)[1].strip()
            elif body.startswith("config_hash:"):
                stored_hash = body.split(":", 1)[1].strip()
            elif body == "config:":
                break
            continue
        if not line.strip():
            continue
        values = [float(v) for v in line.split()]
        if section == "position":
            pos.append(values)
        elif section == "momentum":
            mom.append(values)
    if not pos or not mom:
        raise ConfigError(f"{path} is missing decode table sections")
    pos_arr = np.asarray(pos)
    mom_arr = np.asarray(mom)
    tables = DecodeTables(
        pos_x=pos_arr[:, 0],
        pos_phi0=pos_arr[:, 1],
        mom_p=mom_arr[:, 0],
        mom_c=mom_arr[:, 1],
        build_config={"loaded_from": str(path)},
    )
    return tables, stored_hash
