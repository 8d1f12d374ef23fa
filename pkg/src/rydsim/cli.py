"""Experiment runner: descriptors in, reproducible CSV/JSON artifacts out.

Each bundled experiment is a TOML descriptor naming a registered runner
plus its parameter block.  Runs write their artifacts and a manifest with
content checksums; identical descriptor, version and thread count give
byte-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

import numpy as np

from . import __version__
from .errors import EDBudgetExceeded, RydsimError, ValidationError

DESK_BUDGET = int(2e7)


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    digest.update(path.read_bytes())
    return digest.hexdigest()


# ----------------------------------------------------------------------
# Parameter validation
# ----------------------------------------------------------------------

@dataclass
class ParamSpec:
    name: str
    kind: type
    required: bool = True
    default: object = None


@dataclass
class Runner:
    key: str
    description: str
    params: list
    func: object
    outputs: tuple


REGISTRY: dict = {}


def runner(key, description, params, outputs):
    def deco(func):
        REGISTRY[key] = Runner(key=key, description=description, params=params,
                               func=func, outputs=outputs)
        return func
    return deco


def _coerce(spec: ParamSpec, value, where: str):
    kind = spec.kind
    if kind is float and isinstance(value, int):
        value = float(value)
    if kind is list:
        if not isinstance(value, list):
            raise ValidationError(f"{where}: field '{spec.name}' must be a list")
        return [float(v) for v in value]
    if not isinstance(value, kind):
        raise ValidationError(
            f"{where}: field '{spec.name}' must be {kind.__name__}, "
            f"got {type(value).__name__}")
    return value


@dataclass
class Descriptor:
    name: str
    experiment: str
    description: str
    params: dict
    outputs: dict
    budget: str
    seed: int
    path: Path | None = None
    raw: bytes = b""

    def digest(self) -> str:
        return hashlib.sha256(self.raw).hexdigest()


def load_descriptor(path) -> Descriptor:
    path = Path(path)
    raw = path.read_bytes()
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"{path.name}: {exc}") from exc
    where = path.name
    for key in ("name", "experiment"):
        if key not in data:
            raise ValidationError(f"{where}: missing top-level field '{key}'")
    experiment = data["experiment"]
    if experiment not in REGISTRY:
        known = ", ".join(sorted(REGISTRY))
        raise ValidationError(
            f"{where}: unknown experiment '{experiment}' (known: {known})")
    run = REGISTRY[experiment]
    params_in = dict(data.get("params", {}))
    params = {}
    for spec in run.params:
        if spec.name in params_in:
            params[spec.name] = _coerce(spec, params_in.pop(spec.name), where)
        elif spec.required:
            raise ValidationError(f"{where}: missing required parameter "
                                  f"'{spec.name}' for '{experiment}'")
        else:
            params[spec.name] = spec.default
    if params_in:
        raise ValidationError(
            f"{where}: unknown parameters {sorted(params_in)} for '{experiment}'")
    outputs = dict(data.get("output", {}))
    for out_key in run.outputs:
        outputs.setdefault(out_key, f"{data['name']}_{out_key}.csv")
    budget = data.get("budget", "desk")
    if budget not in ("desk", "long"):
        raise ValidationError(f"{where}: budget must be 'desk' or 'long'")
    return Descriptor(name=data["name"], experiment=experiment,
                      description=data.get("description", ""), params=params,
                      outputs=outputs, budget=budget,
                      seed=int(data.get("seed", 1234)), path=path, raw=raw)


def bundled_descriptors() -> list:
    folder = Path(__file__).parent / "experiments"
    return sorted(folder.glob("*.toml"))


# ----------------------------------------------------------------------
# Runners
# ----------------------------------------------------------------------

@runner("cv_convergence",
        "single-site spectrum vs the ring-particle limit as J grows",
        [ParamSpec("chi", float), ParamSpec("omega_p", float),
         ParamSpec("j_values", list)],
        ("levels",))
def _run_cv_convergence(desc, outdir, budget):
    from . import cv

    p = desc.params
    params = cv.RingParticleParams(chi=p["chi"], omega_p=p["omega_p"])
    report = cv.convergence_scan(params, [int(j) for j in p["j_values"]])
    rows = []
    for row, j in enumerate(report.j_values):
        from .spinops import SpinLength
        spec = cv.spin_spectrum(params, SpinLength(float(j)))
        for lvl in range(report.compared_levels):
            rows.append((j, lvl, spec[lvl], report.continuum[lvl],
                         report.deviations[row, lvl]))
    out = outdir / desc.outputs["levels"]
    write_csv(out, ["j", "level", "spin_energy", "ring_energy", "deviation"],
              rows)
    return [out]


@runner("cv_harmonic_scan",
        "higher-harmonic depth scan of the truncated ring spectrum",
        [ParamSpec("chi", float), ParamSpec("omega_p", float),
         ParamSpec("j", float), ParamSpec("kappa", int),
         ParamSpec("lam_values", list), ParamSpec("n_levels", int)],
        ("levels",))
def _run_cv_harmonic(desc, outdir, budget):
    from . import cv
    from .spinops import SpinLength

    p = desc.params
    rows = []
    for lam in p["lam_values"]:
        params = cv.RingParticleParams(chi=p["chi"], omega_p=p["omega_p"],
                                       lam=lam, kappa=p["kappa"])
        spin = cv.spin_spectrum(params, SpinLength(p["j"]))[: p["n_levels"]]
        cont = cv.continuum_spectrum(params, n_levels=p["n_levels"])
        for lvl in range(p["n_levels"]):
            rows.append((lam, lvl, spin[lvl], cont[lvl]))
    out = outdir / desc.outputs["levels"]
    write_csv(out, ["lam", "level", "spin_energy", "ring_energy"], rows)
    return [out]


@runner("gap_scaling",
        "finite-spin chain gap against the free-theory value",
        [ParamSpec("n_sites", int), ParamSpec("j_values", list),
         ParamSpec("v_nn", float), ParamSpec("lam", float),
         ParamSpec("kappa", int, required=False, default=1)],
        ("gaps",))
def _run_gap_scaling(desc, outdir, budget):
    from . import qft

    p = desc.params
    with_ising = qft.sg_gap_benchmark(p["n_sites"], p["j_values"], p["v_nn"],
                                      p["lam"], kappa=p["kappa"],
                                      include_ising=True, budget=budget)
    without = qft.sg_gap_benchmark(p["n_sites"], p["j_values"], p["v_nn"],
                                   p["lam"], kappa=p["kappa"],
                                   include_ising=False, budget=budget)
    rows = [(wi.j, wi.gap, wo.gap, wi.oracle)
            for wi, wo in zip(with_ising, without)]
    out = outdir / desc.outputs["gaps"]
    write_csv(out, ["j", "gap_with_ising", "gap_without", "oracle"], rows)
    return [out]


@runner("dispersion",
        "free-theory dispersion (nearest-neighbor and long-range) plus the "
        "lowest chain excitations labelled by momentum",
        [ParamSpec("n_sites", int), ParamSpec("j", float),
         ParamSpec("v_nn", float), ParamSpec("lam", float),
         ParamSpec("n_levels", int), ParamSpec("q_points", int)],
        ("analytic", "lattice"))
def _run_dispersion(desc, outdir, budget):
    from . import qft
    from .lattice import ground_state

    p = desc.params
    qs = np.linspace(0.0, 2.0 * math.pi, p["q_points"], endpoint=False)
    nn = qft.dispersion_nn(1.0, p["lam"], p["v_nn"], qs)
    lr = qft.dispersion_long_range(1.0, p["lam"], p["v_nn"], qs)
    out1 = outdir / desc.outputs["analytic"]
    write_csv(out1, ["q", "omega_nn", "omega_long_range"],
              list(zip(qs, nn, lr)))

    model = qft.sg_lattice_model(p["n_sites"], p["j"], p["v_nn"], p["lam"],
                                 budget=budget)
    res = ground_state(model.hamiltonian, k=p["n_levels"] + 1)
    perm = _translation_permutation(p["n_sites"], model.site_dim)
    rows = []
    for lvl in range(1, p["n_levels"] + 1):
        vec = res.vectors[:, lvl]
        t_expect = complex(np.vdot(vec, vec[perm]))
        rows.append((lvl, res.values[lvl] - res.values[0],
                     math.atan2(t_expect.imag, t_expect.real),
                     abs(t_expect)))
    out2 = outdir / desc.outputs["lattice"]
    write_csv(out2, ["level", "excitation_energy", "momentum", "momentum_purity"],
              rows)
    return [out1, out2]


def _translation_permutation(n_sites: int, site_dim: int) -> np.ndarray:
    dim = site_dim**n_sites
    idx = np.arange(dim)
    digits = []
    rest = idx
    for _ in range(n_sites):
        digits.append(rest % site_dim)
        rest = rest // site_dim
    digits = digits[::-1]            # most-significant first
    rotated = digits[1:] + digits[:1]
    out = np.zeros(dim, dtype=np.int64)
    for d in rotated:
        out = out * site_dim + d
    return out


@runner("quench_gap",
        "tilt-release gap measurement against exact diagonalization",
        [ParamSpec("n_sites", int), ParamSpec("j", float),
         ParamSpec("v_nn", float), ParamSpec("lam_values", list),
         ParamSpec("alpha", float)],
        ("gaps", "signals"))
def _run_quench(desc, outdir, budget):
    from . import qft

    p = desc.params
    rows, signal_rows = [], []
    for lam in p["lam_values"]:
        res = qft.quench_gap(p["n_sites"], p["j"], p["v_nn"], lam,
                             alpha=p["alpha"], budget=budget)
        freq = res.frequency if res.frequency is not None else float("nan")
        rows.append((lam, freq, res.ed_gap, res.free_gap))
        for t, s in zip(res.times, res.signal):
            signal_rows.append((lam, t, s))
    out1 = outdir / desc.outputs["gaps"]
    write_csv(out1, ["lam", "fitted_frequency", "ed_gap", "free_gap"], rows)
    out2 = outdir / desc.outputs["signals"]
    write_csv(out2, ["lam", "time", "jy_mean"], signal_rows)
    return [out1, out2]


@runner("vertex_scan",
        "ground-state vertex-operator expectation vs the free theory",
        [ParamSpec("n_sites", int), ParamSpec("j", float),
         ParamSpec("v_nn", float), ParamSpec("lam_values", list)],
        ("vertex",))
def _run_vertex(desc, outdir, budget):
    from . import qft
    from .lattice import ground_state, site_operator
    from .spinops import ManifoldBasis, SpinLength, build_cartesian

    p = desc.params
    j = p["j"]
    basis = ManifoldBasis.edge_a(SpinLength(float(j)))
    jx, _, _ = build_cartesian(basis, "a")
    norm = math.sqrt(j * (j + 1.0))
    rows = []
    for lam in p["lam_values"]:
        model = qft.sg_lattice_model(p["n_sites"], j, p["v_nn"], lam,
                                     budget=budget)
        vec = ground_state(model.hamiltonian).vectors[:, 0]
        mean = np.mean([np.vdot(vec, site_operator(jx, i, p["n_sites"],
                                                   model.site_dim) @ vec).real
                        for i in range(p["n_sites"])])
        rows.append((lam, mean / norm,
                     qft.vertex_expectation(1.0, lam, p["v_nn"], p["n_sites"])))
    out = outdir / desc.outputs["vertex"]
    write_csv(out, ["lam", "lattice_cos_phi", "free_theory_cos_phi"], rows)
    return [out]


@runner("capacitor",
        "background-angle quench: site-resolved field and charge dynamics",
        [ParamSpec("n_sites", int), ParamSpec("j", float),
         ParamSpec("kappa", int), ParamSpec("v_nn", float),
         ParamSpec("omega_p", float), ParamSpec("lam_from", float),
         ParamSpec("lam_to", float), ParamSpec("theta_from", float),
         ParamSpec("theta_to", float, required=False, default=0.0)],
        ("field", "charge"))
def _run_capacitor(desc, outdir, budget):
    from . import qft

    p = desc.params
    res = qft.schwinger_capacitor(p["n_sites"], p["j"], p["kappa"], p["v_nn"],
                                  p["omega_p"], p["lam_from"], p["lam_to"],
                                  p["theta_from"], p["theta_to"], budget=budget)
    n = p["n_sites"]
    out1 = outdir / desc.outputs["field"]
    write_csv(out1, ["time"] + [f"jy_site{i}" for i in range(n)],
              [(t, *row) for t, row in zip(res.times, res.field)])
    out2 = outdir / desc.outputs["charge"]
    write_csv(out2, ["time"] + [f"rho_bond{i}" for i in range(n - 1)],
              [(t, *row) for t, row in zip(res.times, res.charge)])
    return [out1, out2]


@runner("transfer_fidelity",
        "state-transfer fidelity audit near the circular level",
        [ParamSpec("j", float), ParamSpec("max_occupation", int)],
        ("fidelities",))
def _run_transfer(desc, outdir, budget):
    from . import gates

    p = desc.params
    rows = []
    for ni in range(p["max_occupation"] + 1):
        for nj in range(p["max_occupation"] + 1):
            for ising in (True, False):
                res = gates.transfer_fidelity(p["j"],
                                              gates.TransferSpec(ni, nj),
                                              include_ising=ising)
                rows.append((p["j"], ni, nj, int(ising), res.fidelity))
    out = outdir / desc.outputs["fidelities"]
    write_csv(out, ["j", "n_i", "n_j", "with_ising", "fidelity"], rows)
    return [out]


@runner("arp_sweep",
        "swept multi-photon transfer from the vertical to the edge manifold",
        [ParamSpec("n", int), ParamSpec("f_it_fraction", float),
         ParamSpec("zeeman_to_stark", float), ParamSpec("drive_mhz", float),
         ParamSpec("duration_us", float), ParamSpec("m_a_values", list),
         ParamSpec("n_steps", int, required=False, default=5000),
         ParamSpec("trace_points", int, required=False, default=0)],
        ("fidelities",))
def _run_arp(desc, outdir, budget):
    from . import manifold as mf
    from .spinops import ManifoldBasis, SpinLength

    p = desc.params
    basis = ManifoldBasis.full(SpinLength.from_n(p["n"]))
    fields = mf.FieldConfig.from_it_fraction(p["n"], p["f_it_fraction"],
                                             p["zeeman_to_stark"])
    defects = mf.DefectModel.rubidium_like()
    om0 = 2.0 * math.pi * p["drive_mhz"] * 1e6
    proto = mf.SweepProtocol(duration=p["duration_us"] * 1e-6, delta0=om0,
                             omega0=om0)
    res = mf.arp_sweep(basis, fields, defects, proto,
                       m_a_values=[int(m) for m in p["m_a_values"]],
                       n_steps=p["n_steps"], trace_points=p["trace_points"])
    out = outdir / desc.outputs["fidelities"]
    write_csv(out, ["m_a", "fidelity"],
              sorted(res.fidelities.items()))
    artifacts = [out]
    if p["trace_points"]:
        out2 = outdir / (out.stem + "_traces.csv")
        write_csv(out2, ["time"] + [f"level{i}" for i in
                                    range(res.eigenvalue_traces.shape[1])],
                  [(t, *row) for t, row in
                   zip(res.trace_times, res.eigenvalue_traces)])
        artifacts.append(out2)
    return artifacts


@runner("ewald_check",
        "lattice-sum evaluation against brute force and its small-q constants",
        [ParamSpec("q_values", list), ParamSpec("brute_terms", int)],
        ("table",))
def _run_ewald(desc, outdir, budget):
    from . import qft

    p = desc.params
    rows = []
    for q in p["q_values"]:
        fast = qft.ewald_epsilon(q)
        brute = qft.epsilon_brute_force(q, int(p["brute_terms"]))
        rows.append((q, fast, brute, abs(fast - brute)))
    c2, c2p = qft.fit_smallq_constants()
    rows.append((0.0, c2, c2p, 0.0))   # last row records the fit constants
    out = outdir / desc.outputs["table"]
    write_csv(out, ["q", "ewald_or_c2", "brute_or_c2log", "difference"], rows)
    return [out]


@runner("sg_masses",
        "soliton and breather masses across the gapped phase",
        [ParamSpec("beta_sq_values", list), ParamSpec("m0", float)],
        ("masses",))
def _run_masses(desc, outdir, budget):
    from . import qft

    rows = []
    for b2 in desc.params["beta_sq_values"]:
        spec = qft.sg_exact_masses(b2, desc.params["m0"])
        for idx, m in enumerate(spec.breathers, start=1):
            rows.append((b2, spec.soliton, idx, m))
        if len(spec.breathers) == 0:
            rows.append((b2, spec.soliton, 0, float("nan")))
    out = outdir / desc.outputs["masses"]
    write_csv(out, ["beta_sq", "soliton_mass", "breather_index",
                    "breather_mass"], rows)
    return [out]


@runner("schwinger_map",
        "coupling-to-charge map of the dual one-dimensional QED",
        [ParamSpec("chi", float), ParamSpec("v_nn", float),
         ParamSpec("omega_p", float), ParamSpec("lam_kappa", float),
         ParamSpec("kappa", int)],
        ("map",))
def _run_schwinger_map(desc, outdir, budget):
    from . import qft

    p = desc.params
    m = qft.map_schwinger(p["chi"], p["v_nn"], p["omega_p"], p["lam_kappa"],
                          p["kappa"])
    rows = [("e_over_m", m.e_over_m), ("e_over_cutoff", m.e_over_cutoff),
            ("m_over_cutoff", m.m_over_cutoff), ("e_ell", m.e_ell),
            ("m_ell", m.m_ell)]
    for key, val in sorted(m.scale_flags.items()):
        rows.append((key, float(val)))
    out = outdir / desc.outputs["map"]
    write_csv(out, ["quantity", "value"], rows)
    return [out]


# ----------------------------------------------------------------------
# Command-line interface
# ----------------------------------------------------------------------

def run_descriptor(desc: Descriptor, out_dir, threads: int | None = None,
                   budget_override: int | None = None) -> dict:
    outdir = Path(out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    budget = budget_override if budget_override is not None else DESK_BUDGET
    if desc.budget == "long" and budget_override is None:
        raise EDBudgetExceeded(
            f"descriptor '{desc.name}' is flagged as a long run; "
            "pass --budget-override to execute it")
    start = time.time()
    limiter = None
    if threads is not None:
        try:
            from threadpoolctl import threadpool_limits
            limiter = threadpool_limits(limits=threads)
        except ImportError:
            os.environ["OMP_NUM_THREADS"] = str(threads)
    try:
        np.random.seed(desc.seed)
        artifacts = REGISTRY[desc.experiment].func(desc, outdir, budget)
    finally:
        if limiter is not None:
            limiter.unregister()
    wall = time.time() - start
    manifest = {
        "name": desc.name,
        "experiment": desc.experiment,
        "descriptor_sha256": desc.digest(),
        "version": __version__,
        "wall_seconds": round(wall, 3),
        "threads": threads,
        "outputs": {p.name: sha256_file(p) for p in artifacts},
    }
    manifest_path = outdir / f"{desc.name}_manifest.json"
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rydsim", description="large-spin manifold experiment runner")
    sub = parser.add_subparsers(dest="command")

    p_run = sub.add_parser("run", help="execute an experiment descriptor")
    p_run.add_argument("descriptor", help="path to a .toml descriptor or the "
                                          "name of a bundled one")
    p_run.add_argument("--out-dir", default="rydsim_out")
    p_run.add_argument("--threads", type=int,
                       default=int(os.environ.get("RYDSIM_THREADS", 0)) or None)
    p_run.add_argument("--budget-override", type=int, default=None,
                       help="raise the many-body dimension cap and unlock "
                            "long-run descriptors")

    sub.add_parser("list", help="show the bundled experiment catalog")

    p_val = sub.add_parser("validate", help="validate a descriptor")
    p_val.add_argument("descriptor")

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0

    if args.command == "list":
        for path in bundled_descriptors():
            try:
                desc = load_descriptor(path)
            except ValidationError as exc:
                print(f"{path.name}: INVALID ({exc})")
                continue
            print(f"{desc.name:28s} [{desc.budget}] {desc.description}")
        return 0

    if args.command == "validate":
        try:
            desc = load_descriptor(_resolve(args.descriptor))
        except (ValidationError, FileNotFoundError) as exc:
            print(f"validation error: {exc}", file=sys.stderr)
            return 2
        print(f"{desc.name}: ok ({desc.experiment})")
        return 0

    if args.command == "run":
        try:
            desc = load_descriptor(_resolve(args.descriptor))
        except (ValidationError, FileNotFoundError) as exc:
            print(f"validation error: {exc}", file=sys.stderr)
            return 2
        try:
            manifest = run_descriptor(desc, args.out_dir, args.threads,
                                      args.budget_override)
        except RydsimError as exc:
            print(f"solver error: {exc}", file=sys.stderr)
            return 3
        print(json.dumps(manifest, indent=2, sort_keys=True))
        return 0

    parser.print_usage()
    return 2


def _resolve(name: str) -> Path:
    path = Path(name)
    if path.exists():
        return path
    bundled = Path(__file__).parent / "experiments" / f"{name}.toml"
    if bundled.exists():
        return bundled
    raise FileNotFoundError(f"no descriptor file or bundled experiment '{name}'")


if __name__ == "__main__":
    sys.exit(main())
