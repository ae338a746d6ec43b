"""Five-layer causal trace: one JSON line per decision period

The file starts with a header line::

    {"assets": [...], "schema": "shapcouncil.trace", "version": 1}

followed by one record per period with the layers ``signals``,
``coalitions``, ``credit``, ``blend``, and ``overlays``.  Keys are sorted
and no wall-clock data is written, so identical runs give identical files.

"""

from dataclasses import dataclass, field, fields
import json
from logging import getLogger
from math import isfinite
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from shapcouncil.council import PortfolioVector

logger = getLogger(__name__)

_path_t = Union[str, Path]

SCHEMA = "shapcouncil.trace"
VERSION = 1
LAYERS = ("signals", "coalitions", "credit", "blend", "overlays")


def jsonable(obj):
    """Plain JSON types; non-finite floats become `None`

    >>> jsonable({"a": np.float64("nan"), 1: (np.int64(2), 0.5)})
    {'a': None, '1': [2, 0.5]}

    """
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if isfinite(obj) else None
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


@dataclass
class TraceRecord:
    period: int
    date: str
    signals: Dict = field(default_factory=dict)
    coalitions: Dict = field(default_factory=dict)
    credit: Dict = field(default_factory=dict)
    blend: Dict = field(default_factory=dict)
    overlays: Dict = field(default_factory=dict)

    def __post_init__(self):
        self.period = int(self.period)
        self.date = str(self.date)
        for layer in LAYERS:
            setattr(self, layer, jsonable(getattr(self, layer)))

    @property
    def final(self) -> PortfolioVector:
        """Executed portfolio of the period"""
        final = self.overlays["final"]
        return PortfolioVector(final["weights"], final["cash"])

    @property
    def realized(self) -> Dict:
        return self.overlays.get("realized") or {}

    def as_dict(self) -> Dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: Dict) -> "TraceRecord":
        missing = [k for k in ("period", "date", *LAYERS) if k not in data]
        if missing:
            raise ValueError(f"{missing}: trace record is missing layers")
        return cls(**{f.name: data[f.name] for f in fields(cls)})


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, allow_nan=False)


def emit_trace(
    records: Iterable[TraceRecord], fpath: _path_t, assets: Sequence[str]
) -> Path:
    """Write a header and one line per record"""
    fpath = Path(fpath)
    header = {"schema": SCHEMA, "version": VERSION, "assets": list(assets)}
    with open(fpath, mode="w") as stream:
        stream.write(_dumps(header) + "\n")
        count = 0
        for record in records:
            stream.write(_dumps(record.as_dict()) + "\n")
            count += 1
    logger.info(f"{fpath}: wrote {count} trace records")
    return fpath


def parse_trace(fpath: _path_t) -> Tuple[Dict, List[TraceRecord]]:
    """Read a trace file back into its header and records"""
    fpath = Path(fpath)
    if not fpath.is_file():
        raise FileNotFoundError(f"{fpath}: trace file not found")
    with open(fpath) as stream:
        lines = [line for line in stream if line.strip()]
    if not lines:
        raise ValueError(f"{fpath}: trace file has no header")
    header = json.loads(lines[0])
    if header.get("schema") != SCHEMA:
        raise ValueError(f"{fpath}: not a council trace ({header.get('schema')})")
    if header.get("version") != VERSION:
        raise ValueError(f"{fpath}: unsupported trace version {header.get('version')}")
    return header, [TraceRecord.from_dict(json.loads(line)) for line in lines[1:]]


def _fmt_weights(pf: Dict, assets: Sequence[str], width: int = 6) -> str:
    weights = pf["weights"]
    if isinstance(weights, dict):
        weights = [weights[a] for a in assets]
    cells = [f"{a}={w:.4f}" for a, w in zip(assets, weights) if w > 0]
    rows = [" ".join(cells[i : i + width]) for i in range(0, len(cells), width)]
    return "\n".join(rows + [f"cash={pf['cash']:.4f}"])


def _indent(text: str, prefix: str = "    ") -> str:
    return "\n".join(prefix + line for line in text.splitlines())


def render(record: TraceRecord, assets: Sequence[str]) -> str:
    """Human-readable explanation of one period, layer by layer"""
    sig, coal, credit, blend, ovl = (getattr(record, layer) for layer in LAYERS)
    out = [f"period {record.period} ({record.date})", ""]

    out.append("1. market signals")
    out.append(
        _indent(
            f"regime score ξ={blend['xi']:+.4f} ({blend['regime']}), "
            f"r_30d={sig['r_30d']:+.4f}, σ_30d={sig['sigma_30d']:.4f}, "
            f"r_7d={sig['r_7d']:+.4f}"
        )
    )
    delta_oc = sig.get("delta_oc")
    out.append(
        _indent(
            f"BTC-EW spread={sig['btc_ew_spread']:+.4f}, "
            f"δ_oc={'n/a' if delta_oc is None else format(delta_oc, '+.4f')}"
        )
    )

    out.extend(["", "2. coalition portfolios"])
    for name, decision in coal.items():
        vote, why = decision["vote"], decision["rationale"]
        out.append(_indent(f"{name}: vote {vote} ({why})"))
        out.append(_indent(_fmt_weights(decision, assets), "        "))

    out.extend(["", "3. Shapley credit"])
    out.append(_indent(f"φ={_vec(credit['phi'])}, ω={_vec(credit['omega'])}"))
    out.append(_indent(f"ω̃={_vec(credit['omega_tilde'])}, p={_vec(credit['p'])}"))
    wta = "on" if credit["wta_active"] else "off"
    out.append(_indent(f"α={credit['alpha']:.4f}, winner-takes-all {wta}"))

    out.extend(["", "4. blend"])
    out.append(
        _indent(
            f"β_S1={blend['beta_s1']:.4f}, β_gc={blend['beta_gc']:.4f}, "
            f"κ={blend['kappa']:.4f}, β_gc final={blend['beta_gc_final']:.4f}"
        )
    )

    out.extend(["", "5. overlays"])
    for step in ovl["steps"]:
        state = "active" if step["active"] else "inactive"
        out.append(_indent(f"{step['name']}: {state}"))
    out.append(_indent("executed portfolio:"))
    out.append(_indent(_fmt_weights(ovl["final"], assets), "        "))
    realized = record.realized
    if realized:
        out.append(
            _indent(
                f"realized: gross {realized['gross']:+.6f}, "
                f"cost {realized['cost']:.6f}, "
                f"net {realized['net']:+.6f}"
            )
        )
    return "\n".join(out)


def _vec(values: Sequence[float]) -> str:
    return "(" + ", ".join(f"{v:.4f}" for v in values) + ")"
