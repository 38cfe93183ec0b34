"""Command-line front end for the benchmark pipeline.

Subcommands:

  gen      write random instance files plus an index CSV
  solve    run a solver campaign over an instance directory, streaming one
           CSV row per instance (resumable; already-solved ids are skipped)
  fit      fit a scaling-law family to per-size medians of a results CSV
  compare  aggregate several results CSVs into a report directory with
           summary/series/extrapolation CSVs, fit JSONs, and a PNG figure
  verify   run the built-in invariant checks

Options can come from a JSON config file (--config), keyed by subcommand;
explicit flags win over the config, which wins over built-in defaults.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, daqc, dhqmf, instances, reporting
from .cim import continuous as cim_cont
from .cim import discrete as cim_disc
from .rng import derived_rng, trial_rng

SOLVERS = ("cim-cont", "cim-disc", "daqc", "dhqmf")

RESULT_COLUMNS = {
    "cim-cont": ["instance_id", "n", "mode", "t_max", "trials", "ps", "r99",
                 "tts_norm", "tts_wallclock_s"],
    "cim-disc": ["instance_id", "n", "mode", "t_max", "trials", "ps", "r99",
                 "tts_norm", "tts_wallclock_s", "loss_per_rt", "round_trips"],
    "daqc": ["instance_id", "n", "p", "a", "L", "ground_prob", "r99",
             "t_ss_s", "tts_s"],
    "dhqmf": ["instance_id", "n", "J", "sum_Km", "depth", "tts_s",
              "single_qubit_gates", "cnot_gates", "t_gates"],
}


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text())


def _opt(args, config: dict, name: str, default):
    """Flag value, else config value, else default."""
    val = getattr(args, name.replace("-", "_"), None)
    if val is not None:
        return val
    if name in config:
        return config[name]
    return default


def _int_list(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(tok) for tok in str(text).split(",") if tok.strip()]


def _float_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(tok) for tok in str(text).split(",") if tok.strip()]


# ---------------------------------------------------------------- gen

def cmd_gen(args, config: dict) -> int:
    out = Path(_opt(args, config, "out", "instances"))
    n_list = _int_list(_opt(args, config, "n-list", "8,10,12"))
    per_n = int(_opt(args, config, "per-n", 10))
    wc = instances.WeightClass(_opt(args, config, "weight-class", "21weight"))
    seed = int(_opt(args, config, "seed", 0))
    if per_n < 1 or not n_list:
        raise SystemExit("gen needs a non-empty size list and per-n >= 1")

    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for n in n_list:
        for i in range(per_n):
            inst_seed = int(derived_rng(seed, n, i).integers(0, 2**63))
            inst = instances.generate_instance(n, wc, inst_seed)
            instance_id = f"inst_n{n:03d}_i{i:03d}"
            instances.save_instance(inst, out / (instance_id + ".json"))
            rows.append([instance_id, n, wc.value, inst_seed, instance_id + ".json"])
    with open(out / "index.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance_id", "n", "weight_class", "seed", "file"])
        writer.writerows(rows)
    print(f"wrote {len(rows)} instances to {out}")
    return 0


def _read_index(inst_dir: Path) -> list[dict]:
    index = inst_dir / "index.csv"
    entries = []
    if index.exists():
        with open(index, newline="") as fh:
            for row in csv.DictReader(fh):
                entries.append({"instance_id": row["instance_id"],
                                "path": str(inst_dir / row["file"])})
    else:
        for path in sorted(inst_dir.glob("*.json")):
            entries.append({"instance_id": path.stem, "path": str(path)})
    return sorted(entries, key=lambda e: e["instance_id"])


# ---------------------------------------------------------------- solve

def _solve_one(task: dict) -> dict:
    """Worker entry: one instance, one solver; returns one result row."""
    try:
        inst = instances.load_instance(task["path"])
        ground = task.get("ground_energy")
        if ground is None:
            ground = instances.brute_force_ground(inst).energy
        solver = task["solver"]
        seed = task["seed"]
        row: dict = {"instance_id": task["instance_id"], "n": inst.n}

        if solver == "cim-cont":
            if task["mode"] == "closed":
                params = cim_cont.ContinuousCimParams(
                    j=task["j"], gamma_s_wallclock=task["gamma_s_wallclock"])
            else:
                params = cim_cont.ContinuousCimParams.open_loop(
                    j=task["j"], gamma_s_wallclock=task["gamma_s_wallclock"])
            opt = cim_cont.optimize_tts(
                inst, params, task["tmax_grid"], task["trials"], seed, ground)
            rec = opt.record
            row.update(mode=task["mode"], t_max=opt.t_max, trials=task["trials"],
                       ps=rec.ps, r99=rec.r99, tts_norm=rec.tts_norm,
                       tts_wallclock_s=rec.tts_wallclock_s)
            if task.get("dump_trajectory"):
                _dump_trajectory(inst, params, ground, seed, task)

        elif solver == "cim-disc":
            loss = task["loss_per_rt"]
            if task["mode"] == "closed":
                params = cim_disc.DiscreteCimParams(loss_per_rt=loss, j=task["j"])
            else:
                params = cim_disc.DiscreteCimParams.open_loop(loss_per_rt=loss, j=task["j"])
            rounds_grid = sorted({max(1, int(round(t / loss))) for t in task["tmax_grid"]})
            opt = cim_disc.optimize_tts(
                inst, params, rounds_grid, task["trials"], seed, ground)
            rec = opt.record
            row.update(mode=task["mode"], t_max=opt.t_max * loss, trials=task["trials"],
                       ps=rec.ps, r99=rec.r99, tts_norm=rec.tts_norm,
                       tts_wallclock_s=rec.tts_wallclock_s,
                       loss_per_rt=loss, round_trips=int(opt.t_max))

        elif solver == "daqc":
            result = daqc.daqc_tts(inst, p=task["layers"], ground_energy=ground)
            rec = result.record
            row.update(p=task["layers"], a=result.schedule.a, L=result.schedule.L,
                       ground_prob=rec.ps, r99=rec.r99, t_ss_s=result.shot_time_s,
                       tts_s=rec.tts_wallclock_s)

        elif solver == "dhqmf":
            hist_dir = task.get("histogram_dir")
            if hist_dir:
                hist = instances.EnergyHistogram.from_csv(
                    Path(hist_dir) / (task["instance_id"] + ".csv"))
            else:
                hist = instances.energy_histogram(inst)
            rng = derived_rng(seed, inst.seed, inst.n)
            results = []
            for _ in range(task["trajectories"]):
                traj = dhqmf.simulate_trajectory(hist, task["p_target"], rng)
                results.append((traj, dhqmf.qmf_tts(traj, inst.n)))
            med = lambda vals: float(np.median(np.asarray(vals, dtype=float)))
            row.update(
                J=med([t.num_updates for t, _ in results]),
                sum_Km=med([r.sum_km for _, r in results]),
                depth=results[0][1].depth,
                tts_s=med([r.record.tts_wallclock_s for _, r in results]),
                single_qubit_gates=med([r.gate_totals["single_qubit"] for _, r in results]),
                cnot_gates=med([r.gate_totals["cnot"] for _, r in results]),
                t_gates=med([r.gate_totals["t_gate"] for _, r in results]),
            )
        else:
            raise ValueError(f"unknown solver {solver!r}")
        return {"ok": True, "row": row, "instance_id": task["instance_id"]}
    except Exception as exc:  # noqa: BLE001 - reported per instance
        return {"ok": False, "error": f"{type(exc).__name__}: {exc}",
                "instance_id": task.get("instance_id", "?")}


def _dump_trajectory(inst, params, ground, seed, task) -> None:
    rng = trial_rng(seed, inst, params.n_steps(), 0)
    trial = cim_cont.run_trial(inst, params, ground, rng, record_stride=4)
    traj = trial.trajectory
    out_dir = Path(task["dump_trajectory"])
    out_dir.mkdir(parents=True, exist_ok=True)
    base = out_dir / f"trajectory_{task['instance_id']}"
    n = inst.n
    with open(str(base) + ".csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"mu_{i}" for i in range(n)]
                        + [f"sigma_{i}" for i in range(n)]
                        + [f"eta_{i}" for i in range(n)]
                        + [f"e_{i}" for i in range(n)] + ["energy"])
        for k in range(len(traj["t"])):
            writer.writerow([repr(float(traj["t"][k]))]
                            + [repr(float(v)) for v in traj["mu"][k]]
                            + [repr(float(v)) for v in traj["sigma"][k]]
                            + [repr(float(v)) for v in traj["eta"][k]]
                            + [repr(float(v)) for v in traj["e"][k]]
                            + [repr(float(traj["energy"][k]))])
    reporting.render_trajectory_figure(traj, str(base) + ".png")


def _load_ground_energies(path: str | None) -> dict:
    if not path:
        return {}
    table = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            table[row["instance_id"]] = float(row["ground_energy"])
    return table


def cmd_solve(args, config: dict) -> int:
    inst_dir = Path(_opt(args, config, "instances", "instances"))
    solver = _opt(args, config, "solver", None)
    if solver not in SOLVERS:
        raise SystemExit(f"--solver must be one of {SOLVERS}")
    out = Path(_opt(args, config, "out", f"results_{solver}.csv"))
    seed = int(_opt(args, config, "seed", 0))
    workers = int(_opt(args, config, "workers", 1))
    grounds = _load_ground_energies(_opt(args, config, "ground-energies", None))

    entries = _read_index(inst_dir)
    if not entries:
        raise SystemExit(f"no instances found in {inst_dir}")

    done: set[str] = set()
    if out.exists():
        with open(out, newline="") as fh:
            done = {row["instance_id"] for row in csv.DictReader(fh)}

    base_task = {
        "solver": solver,
        "seed": seed,
        "j": float(_opt(args, config, "j", 1.0)),
        "mode": _opt(args, config, "mode", "closed"),
        "trials": int(_opt(args, config, "trials", 100)),
        "tmax_grid": _float_list(_opt(args, config, "tmax-grid", "5,10,20")),
        "gamma_s_wallclock": float(_opt(args, config, "gamma-s", 2.5e6)),
        "loss_per_rt": float(_opt(args, config, "loss-per-rt", 0.1)),
        "layers": int(_opt(args, config, "layers", 20)),
        "p_target": float(_opt(args, config, "p-target", 0.99)),
        "trajectories": int(_opt(args, config, "trajectories", 100)),
        "histogram_dir": _opt(args, config, "histogram-dir", None),
        "dump_trajectory": _opt(args, config, "dump-trajectory", None),
    }

    tasks = []
    for entry in entries:
        if entry["instance_id"] in done:
            continue
        task = dict(base_task)
        task.update(entry)
        if entry["instance_id"] in grounds:
            task["ground_energy"] = grounds[entry["instance_id"]]
        tasks.append(task)

    if not tasks:
        print("nothing to do; all instances already solved")
        return 0

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve_one, tasks))
    else:
        results = [_solve_one(t) for t in tasks]

    columns = RESULT_COLUMNS[solver]
    new_file = not out.exists()
    failures = []
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "a", newline="") as fh:
        writer = csv.writer(fh)
        if new_file:
            writer.writerow(columns)
        for res in results:
            if not res["ok"]:
                failures.append((res["instance_id"], res["error"]))
                continue
            row = res["row"]
            writer.writerow([_fmt(row.get(col)) for col in columns])

    print(f"solved {len(results) - len(failures)} instances -> {out}")
    if failures:
        for instance_id, err in failures:
            print(f"FAILED {instance_id}: {err}", file=sys.stderr)
        return 1
    return 0


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return value


# ---------------------------------------------------------------- fit

def _read_results(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _pick_column(rows: list[dict], *candidates: str) -> str | None:
    for cand in candidates:
        if cand in rows[0]:
            return cand
    return None


def _median_points(rows: list[dict], value_col: str) -> list[tuple[int, float]]:
    by_n: dict[int, list[float]] = {}
    for row in rows:
        by_n.setdefault(int(row["n"]), []).append(float(row[value_col]))
    points = []
    for n in sorted(by_n):
        vals = by_n[n]
        n_inf = sum(1 for v in vals if not math.isfinite(v))
        if n_inf * 2 >= len(vals):
            continue
        points.append((n, analysis.median_iqr(vals).median))
    return points


def cmd_fit(args, config: dict) -> int:
    results_path = Path(_opt(args, config, "results", None) or "")
    if not results_path.is_file():
        raise SystemExit("fit needs --results pointing at a results CSV")
    family = _opt(args, config, "family", None)
    if family not in analysis.FIT_FUNCTIONS:
        raise SystemExit(f"--family must be one of {sorted(analysis.FIT_FUNCTIONS)}")
    rows = _read_results(results_path)
    if not rows:
        raise SystemExit(f"{results_path} is empty")
    value_col = _opt(args, config, "value-column", None) or _pick_column(
        rows, "tts_norm", "tts_s", "tts_wallclock_s")
    if value_col is None or value_col not in rows[0]:
        raise SystemExit(f"no usable TTS column in {results_path}")

    points = _median_points(rows, value_col)
    fit = analysis.FIT_FUNCTIONS[family](points)
    out = Path(_opt(args, config, "out", str(results_path.with_suffix("")) + "_fit.json"))
    ns = [n for n, _ in points]
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(fit.to_json_dict((min(ns), max(ns))), indent=2) + "\n")
    reporting.render_fit_figure(ns, [v for _, v in points], fit,
                                out.with_suffix(".png"), ylabel=value_col)
    print(f"fit {family} on {value_col}: {fit.params} -> {out}")
    return 0


# ---------------------------------------------------------------- compare

def _records_from_csv(path: Path, label: str) -> list[analysis.TtsRecord]:
    rows = _read_results(path)
    if not rows:
        return []
    ps_col = _pick_column(rows, "ps", "ground_prob")
    norm_col = _pick_column(rows, "tts_norm", "sum_Km")
    wall_col = _pick_column(rows, "tts_wallclock_s", "tts_s")
    r99_col = _pick_column(rows, "r99")
    records = []
    for row in rows:
        records.append(analysis.TtsRecord(
            ps=float(row[ps_col]) if ps_col else math.nan,
            r99=float(row[r99_col]) if r99_col else math.nan,
            tts_norm=float(row[norm_col]) if norm_col else math.nan,
            tts_wallclock_s=float(row[wall_col]) if wall_col else math.nan,
            solver=label,
            instance_id=row.get("instance_id", ""),
            n=int(row["n"]),
        ))
    return records


def cmd_compare(args, config: dict) -> int:
    inputs = _opt(args, config, "inputs", None) or []
    if not inputs:
        raise SystemExit("compare needs at least one results CSV")
    out_dir = Path(_opt(args, config, "out", "report"))
    extrap_text = _opt(args, config, "extrapolate", None)
    extrapolate = None
    if extrap_text:
        lo, hi = str(extrap_text).split(":")
        extrapolate = (int(lo), int(hi))

    series: dict[str, list[analysis.TtsRecord]] = {}
    for item in inputs:
        if "=" in str(item):
            label, path = str(item).split("=", 1)
        else:
            path = str(item)
            label = Path(path).stem
        recs = _records_from_csv(Path(path), label)
        if not recs:
            raise SystemExit(f"no rows in {path}")
        series[label] = recs

    families = {}
    fam_text = _opt(args, config, "families", None)
    if fam_text:
        for pair in str(fam_text).split(","):
            label, fam = pair.split(":")
            families[label.strip()] = fam.strip()

    report = analysis.compare_report(
        series, out_dir=out_dir, families=families,
        value_field=_opt(args, config, "value-field", "tts_wallclock_s"),
        extrapolate=extrapolate,
    )
    reporting.render_compare_figure(report, out_dir / "tts_comparison.png")
    print(f"report written to {out_dir}")
    return 0


# ---------------------------------------------------------------- verify

def _verify_checks() -> list[tuple[str, bool, str]]:
    results = []

    def check(name, fn):
        try:
            fn()
            results.append((name, True, ""))
        except Exception as exc:  # noqa: BLE001
            results.append((name, False, f"{type(exc).__name__}: {exc}"))

    def formulas():
        assert analysis.r99_from_ps(0.99) == 1.0
        assert abs(analysis.r99_from_ps(0.5) - math.log(0.01) / math.log(0.5)) < 1e-12
        m, theta = dhqmf.optimal_iterations(1, 4)
        assert m == 1 and abs(dhqmf.grover_success_prob(m, theta)[0] - 1.0) < 1e-12
        assert dhqmf.optimal_iterations(16, 16)[0] == 0

    def fit_roundtrip():
        ns = range(4, 31, 2)
        pts = [(n, 0.26 * 2.32 ** math.sqrt(n)) for n in ns]
        fit = analysis.fit_sqrt_exponential(pts)
        assert abs(fit.params["A"] - 0.26) < 1e-9 and abs(fit.params["B"] - 2.32) < 1e-9
        qpts = [(n, (17.3 * n**2 * math.log(math.log(n)) + 2870 * math.log(n) ** 2
                     - 1650 * n) * math.sqrt(2) ** n) for n in ns]
        qfit = analysis.fit_qmf_form(qpts)
        assert abs(qfit.params["A_tilde"] / 17.3 - 1) < 1e-6

    def instance_oracles():
        inst = instances.generate_instance(10, instances.WeightClass.TWENTY_ONE_WEIGHT, 11)
        inst2 = instances.generate_instance(10, instances.WeightClass.TWENTY_ONE_WEIGHT, 11)
        assert np.array_equal(inst.couplings, inst2.couplings)
        hist = instances.energy_histogram(inst)
        ground = instances.brute_force_ground(inst)
        assert hist.total_states == 2**10
        assert abs(hist.ground_energy - ground.energy) < 1e-9
        assert hist.ground_degeneracy == ground.degeneracy
        cfg = instances.SpinConfig.from_index(123, 10)
        assert abs(instances.energy(inst, cfg) - instances.energy(inst, cfg.flipped())) < 1e-12

    def gaussian_maps():
        state = cim_disc.PulseState.vacuum()
        out = cim_disc.map_background_loss(state, 0.7)
        assert np.allclose(out.cov, state.cov) and np.allclose(out.mean, 0)
        st = cim_cont.init_state(3)
        assert np.all(st.sigma == 0.5) and np.all(st.eta == 0.5) and np.all(st.e == 1.0)

    def schedule_identity():
        inst = instances.generate_instance(6, instances.WeightClass.TWENTY_ONE_WEIGHT, 3)
        sched = daqc.build_schedule(inst, p=7, a=1.7, L=2.0)
        total = (sched.gamma * daqc.problem_norm(inst)).sum() + (
            sched.beta * math.sqrt(inst.n)).sum()
        assert abs(total - sched.T) < 1e-10
        state = daqc.run_qaoa(inst, daqc.build_schedule(inst, 3, 4.0, 2.0))
        assert abs(np.vdot(state, state).real - 1.0) < 1e-10

    def discrete_bound():
        inst = instances.generate_instance(4, instances.WeightClass.TWENTY_ONE_WEIGHT, 5)
        ground = instances.brute_force_ground(inst).energy
        params = cim_disc.DiscreteCimParams(n_roundtrips_max=20)
        stats = cim_disc.success_probability(inst, params, ground, 8, 0,
                                             collect_diagnostics=True)
        assert stats.diagnostics.min_det >= 0.25 - cim_disc.DET_TOL

    check("closed-form statistics", formulas)
    check("regression round-trips", fit_roundtrip)
    check("instance oracles", instance_oracles)
    check("gaussian map fixed points", gaussian_maps)
    check("schedule identities and unitarity", schedule_identity)
    check("discrete covariance bound", discrete_bound)
    return results


def cmd_verify(args, config: dict) -> int:
    failures = 0
    for name, ok, err in _verify_checks():
        if ok:
            print(f"ok   {name}")
        else:
            failures += 1
            print(f"FAIL {name}: {err}")
    return 1 if failures else 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cutbench",
        description="MaxCut solver benchmarking: instances, campaigns, fits, reports.",
    )
    parser.add_argument("--config", help="JSON config file keyed by subcommand")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate instance files")
    p_gen.add_argument("--out")
    p_gen.add_argument("--n-list")
    p_gen.add_argument("--per-n", type=int)
    p_gen.add_argument("--weight-class", choices=[w.value for w in instances.WeightClass])
    p_gen.add_argument("--seed", type=int)

    p_solve = sub.add_parser("solve", help="run a solver campaign")
    p_solve.add_argument("--instances")
    p_solve.add_argument("--solver", choices=SOLVERS)
    p_solve.add_argument("--out")
    p_solve.add_argument("--seed", type=int)
    p_solve.add_argument("--workers", type=int)
    p_solve.add_argument("--trials", type=int)
    p_solve.add_argument("--mode", choices=["closed", "open"])
    p_solve.add_argument("--j", type=float)
    p_solve.add_argument("--tmax-grid")
    p_solve.add_argument("--gamma-s", type=float)
    p_solve.add_argument("--loss-per-rt", type=float)
    p_solve.add_argument("--layers", type=int)
    p_solve.add_argument("--p-target", type=float)
    p_solve.add_argument("--trajectories", type=int)
    p_solve.add_argument("--histogram-dir")
    p_solve.add_argument("--ground-energies")
    p_solve.add_argument("--dump-trajectory")

    p_fit = sub.add_parser("fit", help="fit a scaling law to results")
    p_fit.add_argument("--results")
    p_fit.add_argument("--family", choices=sorted(analysis.FIT_FUNCTIONS))
    p_fit.add_argument("--value-column")
    p_fit.add_argument("--out")

    p_cmp = sub.add_parser("compare", help="aggregate results into a report")
    p_cmp.add_argument("--inputs", nargs="+")
    p_cmp.add_argument("--out")
    p_cmp.add_argument("--value-field")
    p_cmp.add_argument("--families")
    p_cmp.add_argument("--extrapolate")

    sub.add_parser("verify", help="run built-in invariant checks")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config_all = _load_config(args.config)
    config = config_all.get(args.command, {})
    if "seed" in config_all and "seed" not in config:
        config["seed"] = config_all["seed"]
    handlers = {
        "gen": cmd_gen,
        "solve": cmd_solve,
        "fit": cmd_fit,
        "compare": cmd_compare,
        "verify": cmd_verify,
    }
    try:
        return handlers[args.command](args, config)
    except ValueError as exc:
        raise SystemExit(f"error: {exc}")


if __name__ == "__main__":
    sys.exit(main())
