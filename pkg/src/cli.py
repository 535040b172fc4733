"""
Command-line entry point

    python -m src.cli fit data.csv --hn 1.5 --out fit.json
    python -m src.cli boot data.csv --boot-num 200 --surv-times 0.5,0.6 --surv-cov 1
    python -m src.cli simulate --scenario const_hazard --n 200 --out sim.csv
    python -m src.cli bench --sizes 100,500 --out bench.csv
    python -m src.cli survcurve data.csv --group-col treatment --out bands.csv
    python -m src.cli study --scenario const_hazard --replications 100

Exit codes: 0 success, 1 estimation or inference failure, 2 invalid input,
3 fit did not converge (trace written beside the output).
"""
import argparse
import logging
import sys

import pandas as pd

from src import __version__
from src.models.params import BootConfig, ProfileConfig, SolverConfig
from src.models.process import PROCESSES, get_process
from src.models.results import RunManifest
from src.services.baseline_direct import bench
from src.services.bootstrap import boot_analyze, survival_bands
from src.services.inference import profile_covariance
from src.services.likelihood import Design
from src.services.mm_solver import MMSolver
from src.services.reporting import build_boot_report, build_fit_report, build_trace_report
from src.services.simulate import SCENARIO_ALIASES, SCENARIO_DEFAULTS, Scenario, generate, run_study
from src.utils.config import get_log_settings, get_solver_defaults, get_thread_count
from src.utils.dataio import dumps, read_dataset, write_csv, write_dataset, write_json, write_manifest
from src.utils.errors import ARMError, ConvergenceError
from src.utils.monitoring import configure_logging, fit_tracker
from src.utils.validation import ValidationError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID = 2
EXIT_NOT_CONVERGED = 3


def _float_list(text):
    if text is None or text == '':
        return None
    try:
        return tuple(float(v) for v in str(text).split(',') if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text):
    try:
        return tuple(int(v) for v in str(text).split(',') if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _solver_config(args):
    return SolverConfig(max_iter=args.max_iter, tol=args.tol, accelerate=args.accelerate).validate()


def _emit_json(payload, out, manifest):
    if out:
        write_json(payload, out)
        write_manifest(out, manifest)
        logger.info(f"Wrote {out}")
    else:
        sys.stdout.write(dumps(payload) + '\n')


def _emit_csv(frame, out, manifest):
    if out:
        write_csv(frame, out)
        write_manifest(out, manifest)
        logger.info(f"Wrote {out}")
    else:
        sys.stdout.write(pd.DataFrame(frame).to_csv(index=False))


def _manifest(args, input_path=None, seed=None):
    config = {k: v for k, v in vars(args).items() if k not in ('handler', 'input')}
    return RunManifest(command=args.command, input_path=input_path, config=config, seed=seed)


def _write_trace(args, trace_payload):
    path = f"{args.out}.trace.json" if args.out else 'fit.trace.json'
    write_json(trace_payload, path)
    logger.error(f"Fit did not converge; log-likelihood trace written to {path}")
    return EXIT_NOT_CONVERGED


def cmd_fit(args):
    data = read_dataset(args.input)
    solver_config = _solver_config(args)
    design = Design.build(data, get_process(args.process))
    try:
        fit = MMSolver(design, solver_config).fit(label='cli-fit')
    except ConvergenceError as e:
        return _write_trace(args, build_trace_report(e))
    if not fit.converged:
        return _write_trace(args, build_trace_report(fit))

    profile = ProfileConfig(hn_multiplier=args.hn, solver=solver_config)
    covariance = profile_covariance(design, fit, profile, threads=get_thread_count(args.threads))
    _emit_json(build_fit_report(data, fit, covariance), args.out, _manifest(args, args.input))
    return EXIT_OK


def _survival_table(result):
    rows = {
        'time': result.time_points,
        'estimate': result.surv_estimate,
        'se': result.surv_se
    }
    for kind, bounds in result.surv_ci.items():
        rows[f'{kind}_lower'] = bounds[:, 0]
        rows[f'{kind}_upper'] = bounds[:, 1]
    return pd.DataFrame(rows)


def cmd_boot(args):
    data = read_dataset(args.input)
    boot_config = BootConfig(
        boot_num=args.boot_num,
        conf=args.conf,
        ci_types=args.ci,
        time_points=args.surv_times,
        covariate_value=args.surv_cov,
        seed=args.seed
    )
    result = boot_analyze(data, boot_config, _solver_config(args), get_process(args.process), args.threads)
    manifest = _manifest(args, args.input, args.seed)
    _emit_json(build_boot_report(result, data), args.out, manifest)
    if args.surv_out and result.time_points is not None:
        write_csv(_survival_table(result), args.surv_out)
        write_manifest(args.surv_out, manifest)
    return EXIT_OK


def _scenario(args):
    return Scenario(kind=args.scenario, beta=args.beta, n=args.n, seed=args.seed).validate()


def cmd_simulate(args):
    data = generate(_scenario(args))
    manifest = _manifest(args, seed=args.seed)
    if args.out:
        write_dataset(data, args.out)
        write_manifest(args.out, manifest)
        logger.info(f"Wrote {data.n} simulated rows to {args.out}: {data.censoring_counts()}")
    else:
        frame = data.to_frame()
        frame['right'] = frame['right'].map(lambda v: 'Inf' if v == float('inf') else v)
        sys.stdout.write(frame.to_csv(index=False))
    return EXIT_OK


def cmd_bench(args):
    records = bench(args.sizes, scenario_kind=args.scenario, repetitions=args.reps, seed=args.seed,
                    solver_config=_solver_config(args))
    _emit_csv([r.to_row() for r in records], args.out, _manifest(args, seed=args.seed))
    return EXIT_OK


def cmd_survcurve(args):
    data = read_dataset(args.input)
    frame = survival_bands(
        data,
        group_col=args.group_col,
        boot_num=args.boot_num,
        conf=args.conf,
        ci_type=args.ci,
        seed=args.seed,
        solver_config=_solver_config(args),
        process=get_process(args.process),
        threads=args.threads
    )
    _emit_csv(frame, args.out, _manifest(args, args.input, args.seed))
    return EXIT_OK


def cmd_study(args):
    solver_config = _solver_config(args)
    summary = run_study(
        _scenario(args),
        replications=args.replications,
        solver_config=solver_config,
        profile_config=ProfileConfig(hn_multiplier=args.hn, solver=solver_config),
        threads=args.threads,
        conf=args.conf
    )
    _emit_json(summary.to_dict(), args.out, _manifest(args, seed=args.seed))
    return EXIT_OK


def _add_solver_options(parser):
    defaults = get_solver_defaults()
    parser.add_argument('--max-iter', type=int, default=defaults['max_iter'], help='iteration limit')
    parser.add_argument('--tol', type=float, default=defaults['tol'], help='stopping tolerance on the summed parameter change')
    parser.add_argument('--no-accelerate', dest='accelerate', action='store_false',
                        default=defaults['accelerate'], help='plain MM sweeps without extrapolation')


def _add_common(parser, process=True):
    parser.add_argument('--out', default=None, help='output file (stdout when omitted)')
    parser.add_argument('--threads', type=int, default=None, help='worker threads (default ARM_MM_THREADS or 1)')
    if process:
        parser.add_argument('--process', choices=sorted(PROCESSES), default='linear',
                            help='covariate process: linear Z=X t, exp Z=X (e^t - 1)')


def _add_scenario_options(parser):
    parser.add_argument('--scenario', default='const_hazard',
                        choices=sorted(SCENARIO_DEFAULTS) + sorted(SCENARIO_ALIASES))
    parser.add_argument('--n', type=int, default=200)
    parser.add_argument('--beta', type=_float_list, default=None, help='true coefficients, comma-separated')
    parser.add_argument('--seed', type=int, default=0)


def build_parser():
    parser = argparse.ArgumentParser(
        prog='arm-mm',
        description='Additive risks model for case-II interval-censored data, fitted by gradient MM'
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('--log-level', default=None, help='override ARM_MM_LOG_LEVEL')
    sub = parser.add_subparsers(dest='command', required=True)

    fit = sub.add_parser('fit', help='estimate beta and the baseline with profile standard errors')
    fit.add_argument('input', help='CSV with columns left,right,L,I,R,x1..xp')
    fit.add_argument('--hn', type=float, default=1.5, help='profile step multiplier c in h = c / sqrt(n)')
    _add_solver_options(fit)
    _add_common(fit)
    fit.set_defaults(handler=cmd_fit)

    boot = sub.add_parser('boot', help='bootstrap standard errors and confidence intervals')
    boot.add_argument('input')
    boot.add_argument('--boot-num', type=int, default=200)
    boot.add_argument('--conf', type=float, default=0.95)
    boot.add_argument('--ci', default='norm,basic,perc,bca', help='comma-separated subset of norm,basic,perc,bca')
    boot.add_argument('--surv-times', type=_float_list, default=None)
    boot.add_argument('--surv-cov', type=_float_list, default=None)
    boot.add_argument('--surv-out', default=None, help='CSV for the survival estimates and bands')
    boot.add_argument('--seed', type=int, default=0)
    _add_solver_options(boot)
    _add_common(boot)
    boot.set_defaults(handler=cmd_boot)

    simulate = sub.add_parser('simulate', help='draw a synthetic dataset in the input layout')
    _add_scenario_options(simulate)
    simulate.add_argument('--out', default=None)
    simulate.set_defaults(handler=cmd_simulate)

    bench_parser = sub.add_parser('bench', help='time MM against direct quasi-Newton fitting')
    bench_parser.add_argument('--sizes', type=_int_list, default=(100, 200, 500))
    bench_parser.add_argument('--reps', type=int, default=3)
    bench_parser.add_argument('--scenario', default='const_hazard', choices=sorted(SCENARIO_DEFAULTS))
    bench_parser.add_argument('--seed', type=int, default=0)
    _add_solver_options(bench_parser)
    bench_parser.add_argument('--out', default=None)
    bench_parser.set_defaults(handler=cmd_bench)

    survcurve = sub.add_parser('survcurve', help='per-group survival curves with bootstrap bands')
    survcurve.add_argument('input')
    survcurve.add_argument('--group-col', default='0', help='covariate name or 0-based index')
    survcurve.add_argument('--boot-num', type=int, default=200)
    survcurve.add_argument('--conf', type=float, default=0.95)
    survcurve.add_argument('--ci', default='perc', help='band type: norm, basic, perc or bca')
    survcurve.add_argument('--seed', type=int, default=0)
    _add_solver_options(survcurve)
    _add_common(survcurve)
    survcurve.set_defaults(handler=cmd_survcurve)

    study = sub.add_parser('study', help='replication study: bias, spread, standard errors, coverage')
    _add_scenario_options(study)
    study.add_argument('--replications', type=int, default=100)
    study.add_argument('--hn', type=float, default=1.5)
    study.add_argument('--conf', type=float, default=0.95)
    _add_solver_options(study)
    _add_common(study, process=False)
    study.set_defaults(handler=cmd_study)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    settings = get_log_settings()
    configure_logging(args.log_level or settings['level'], settings['log_file'])

    try:
        code = args.handler(args)
        logger.debug(f"Run summary: {fit_tracker.get_metrics()}")
        return code
    except ValidationError as e:
        logger.error(str(e))
        sys.stderr.write(f"error: {e}\n")
        return EXIT_INVALID
    except ARMError as e:
        logger.error(f"{type(e).__name__}: {e.message} {e.details}")
        sys.stderr.write(f"error: {e.message}\n")
        return EXIT_FAILURE


if __name__ == '__main__':
    sys.exit(main())
