"""
Run configuration: an INI file with one section per component.

Every key is declared in :data:`SCHEMA` with its type and default; ``REQUIRED``
marks keys without a default.  Unknown sections or keys and missing required
keys raise :class:`~chcontrol.errors.ConfigError` carrying the dotted key name.
"""
import configparser
import hashlib
from dataclasses import dataclass

import numpy as np

from .control import ControlBox
from .cost import CostSpec
from .errors import ConfigError
from .grid import STRIP, Geometry
from .io import load_field
from .optimizer import ControlProblem, OptimizerOptions
from .potentials import PotentialPair, PotentialSpec
from .state import SolverConfig

REQUIRED = object()


def _floats(text):
    return tuple(float(t) for t in text.replace(",", " ").split())


SCHEMA = {
    "run": {"seed": (int, 0), "output_dir": (str, "out")},
    "geometry": {"mode": (str, REQUIRED), "nx": (int, REQUIRED), "ny": (int, None),
                 "lx": (float, 1.0), "ly": (float, 1.0)},
    "potentials": {"bulk": (str, "RegularQuartic"), "boundary": (str, None),
                   "c": (float, 3.0), "c_boundary": (float, None),
                   "eta": (float, 1.0), "compat_C": (float, 0.0)},
    "solver": {"T": (float, REQUIRED), "nt": (int, REQUIRED), "tau": (float, 1.0),
               "scheme": (str, "FullyImplicit"), "newton_tol": (float, 1e-10),
               "newton_max": (int, 50), "guard_delta": (float, 1e-6)},
    "initial": {"kind": (str, "cosine"), "mean": (float, 0.0), "amplitude": (float, 0.0),
                "kx": (int, 1), "ky": (int, 0), "noise": (float, 0.0), "file": (str, "")},
    "control": {"kind": (str, "zero"), "value": (float, 0.0), "amplitude": (float, 0.0),
                "freq": (float, 1.0), "kx": (int, 0), "file": (str, "")},
    "cost": {"bQ": (float, 0.0), "bSigma": (float, 0.0), "bOmega": (float, 0.0),
             "bGamma": (float, 0.0), "b0": (float, 0.0),
             "zQ_mean": (float, 0.0), "zQ_amplitude": (float, 0.0), "zQ_kx": (int, 1),
             "zSigma_mean": (float, 0.0), "zSigma_amplitude": (float, 0.0), "zSigma_kx": (int, 1),
             "zOmega_mean": (float, 0.0), "zOmega_amplitude": (float, 0.0), "zOmega_kx": (int, 1),
             "zGamma_mean": (float, 0.0), "zGamma_amplitude": (float, 0.0), "zGamma_kx": (int, 1)},
    "box": {"u_min": (float, -1.0), "u_max": (float, 1.0), "M0": (float, 1e6)},
    "optimizer": {"step0": (float, 1.0), "armijo_c": (float, 1e-4), "shrink": (float, 0.5),
                  "max_iter": (int, 200), "stat_tol": (float, None),
                  "max_backtracks": (int, 40), "n_probes": (int, 100)},
    "verify": {"eps": (_floats, (1e-2, 1e-3, 1e-4, 1e-5)),
               "taylor_eps": (_floats, (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)),
               "direction": (str, "random"), "direction_amplitude": (float, 1.0),
               "n_pairs": (int, 20), "n_duality": (int, 20), "gradient_tol": (float, 1e-6),
               "corrupt_adjoint": (float, 0.0)},
}


@dataclass
class RunConfig:
    """Parsed and validated configuration; ``text`` is the exact source."""

    values: dict
    text: str

    def __getitem__(self, section):
        return self.values[section]

    @property
    def digest(self):
        return hashlib.sha256(self.text.encode()).hexdigest()

    @property
    def seed(self):
        return self.values["run"]["seed"]

    def with_seed(self, seed):
        vals = {s: dict(v) for s, v in self.values.items()}
        vals["run"]["seed"] = int(seed)
        return RunConfig(vals, self.text)

    # -- builders --------------------------------------------------------
    def geometry(self):
        g = self["geometry"]
        if g["mode"] == STRIP and g["ny"] is None:
            raise ConfigError("missing key geometry.ny (required for Strip2D)", "geometry.ny")
        try:
            return Geometry(g["mode"], g["nx"], g["ny"] or 1, g["lx"], g["ly"])
        except ValueError as exc:
            raise ConfigError(f"invalid geometry: {exc}", "geometry") from exc

    def pair(self):
        p = self["potentials"]
        try:
            bulk = PotentialSpec(p["bulk"], p["c"])
            bkind = p["boundary"] or p["bulk"]
            bc = p["c_boundary"] if p["c_boundary"] is not None else p["c"]
            return PotentialPair(bulk, PotentialSpec(bkind, bc), p["eta"], p["compat_C"])
        except ValueError as exc:
            raise ConfigError(f"invalid potentials: {exc}", "potentials") from exc

    def solver(self):
        s = self["solver"]
        try:
            return SolverConfig(s["T"], s["nt"], s["tau"], s["scheme"], s["newton_tol"],
                                s["newton_max"], s["guard_delta"])
        except ValueError as exc:
            raise ConfigError(f"invalid solver settings: {exc}", "solver") from exc

    def initial_state(self, geom):
        c = self["initial"]
        if c["kind"] == "file":
            if not c["file"]:
                raise ConfigError("missing key initial.file", "initial.file")
            return load_field(c["file"], geom)
        if c["kind"] not in ("constant", "cosine"):
            raise ConfigError(f"unknown initial.kind {c['kind']!r}", "initial.kind")
        x = geom.coords[:, 0] / geom.lx
        y0 = np.full(geom.n, c["mean"])
        if c["kind"] == "cosine":
            prof = np.cos(2 * np.pi * c["kx"] * x)
            if geom.coords.shape[1] > 1:
                prof = prof * np.cos(np.pi * c["ky"] * geom.coords[:, 1] / geom.ly)
            y0 += c["amplitude"] * prof
        if c["noise"]:
            rng = np.random.default_rng(self.seed)
            noise = rng.uniform(-1, 1, geom.n)
            y0 += c["noise"] * (noise - geom.mass @ noise / geom.volume)
        return y0

    def control(self, geom, cfg):
        c = self["control"]
        kind = c["kind"]
        shape = (cfg.nt + 1, geom.nb)
        if kind == "zero":
            return np.zeros(shape)
        if kind == "constant":
            return np.full(shape, c["value"])
        if kind == "sine":
            t = cfg.times[:, None]
            xb = geom.bnd_coords[:, 0][None, :] / geom.lx
            return c["value"] + c["amplitude"] * np.sin(2 * np.pi * c["freq"] * t / cfg.T) \
                * np.cos(2 * np.pi * c["kx"] * xb)
        if kind == "file":
            if not c["file"]:
                raise ConfigError("missing key control.file", "control.file")
            v = load_field(c["file"])
            if v.size != np.prod(shape):
                raise ConfigError(f"control file has {v.size} values, expected {np.prod(shape)}",
                                  "control.file")
            return v.reshape(shape)
        raise ConfigError(f"unknown control.kind {kind!r}", "control.kind")

    def cost(self, geom, cfg):
        c = self["cost"]
        xq = geom.coords[:, 0] / geom.lx
        xb = geom.bnd_coords[:, 0] / geom.lx

        def target(name, x):
            return c[name + "_mean"] + c[name + "_amplitude"] * np.sin(2 * np.pi * c[name + "_kx"] * x)

        try:
            return CostSpec(c["bQ"], c["bSigma"], c["bOmega"], c["bGamma"], c["b0"],
                            target("zQ", xq), target("zSigma", xb),
                            target("zOmega", xq), target("zGamma", xb))
        except ValueError as exc:
            raise ConfigError(f"invalid cost: {exc}", "cost") from exc

    def box(self):
        b = self["box"]
        try:
            return ControlBox(b["u_min"], b["u_max"], b["M0"])
        except ValueError as exc:
            raise ConfigError(f"invalid control box: {exc}", "box") from exc

    def optimizer(self):
        o = self["optimizer"]
        return OptimizerOptions(o["step0"], o["armijo_c"], o["shrink"], o["max_iter"],
                                o["stat_tol"], o["max_backtracks"])

    def problem(self):
        geom = self.geometry()
        cfg = self.solver()
        return ControlProblem(geom, self.initial_state(geom), self.pair(), cfg,
                              self.cost(geom, cfg), self.box())


def parse_config(text):
    """Parse INI ``text`` against :data:`SCHEMA`."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case sensitive (bQ, T, M0)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", section)
        for key in cp[section]:
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}", f"{section}.{key}")
    values = {}
    for section, keys in SCHEMA.items():
        values[section] = {}
        for key, (conv, default) in keys.items():
            name = f"{section}.{key}"
            raw = cp.get(section, key, fallback=None) if cp.has_section(section) else None
            if raw is None or raw.strip() == "":
                if default is REQUIRED:
                    raise ConfigError(f"missing key {name}", name)
                values[section][key] = default
                continue
            try:
                values[section][key] = conv(raw.strip())
            except ValueError as exc:
                raise ConfigError(f"bad value for {name}: {raw!r}", name) from exc
    return RunConfig(values, text)


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
