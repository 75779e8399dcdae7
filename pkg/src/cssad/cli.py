"""Command line entry point: ``cssad simulate | run | evaluate | metrics``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 stage failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .diarize import SCHEMES
from .io import read_segment_json
from .mixgen import InfeasibleSpecError
from .pipeline import (STAGES, DataError, StageError, evaluate_dirs, evaluate_meeting,
                       format_report, load_config, run_meeting, simulate_corpus, _report_entry)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_STAGE = 0, 1, 2, 3

logger = logging.getLogger('cssad')


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f'{self.prog}: error: {message}\n')


def _meeting_dirs(path: Path) -> list:
    if (path / 'mixture.wav').exists():
        return [path]
    return sorted(p for p in path.iterdir() if (p / 'mixture.wav').exists())


def cmd_simulate(args) -> int:
    try:
        spec = json.loads(Path(args.spec).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f'error: cannot read spec {args.spec}: {exc}', file=sys.stderr)
        return EXIT_DATA
    if args.seed is not None:
        spec['seed'] = args.seed
    try:
        written = simulate_corpus(spec, args.out)
    except (InfeasibleSpecError, ValueError, TypeError) as exc:
        print(f'error: {exc}', file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f'error: writing {exc.filename}: {exc.strerror}', file=sys.stderr)
        return EXIT_DATA
    for d in written:
        print(d)
    return EXIT_OK


def _run_one(job):
    meeting_dir, out_dir, cfg, stages = job
    return meeting_dir.name, run_meeting(meeting_dir, out_dir / meeting_dir.name, cfg, stages)


def cmd_run(args) -> int:
    overrides = {'scheme': args.scheme, 'seed': args.seed}
    try:
        cfg = load_config(args.config, overrides)
    except (DataError, ValueError) as exc:
        print(f'error: {exc}', file=sys.stderr)
        return EXIT_DATA
    src = Path(args.meetings)
    if not src.is_dir():
        print(f'error: input directory {src} does not exist', file=sys.stderr)
        return EXIT_DATA
    meetings = _meeting_dirs(src)
    if not meetings:
        print(f'error: no meetings (mixture.wav) under {src}', file=sys.stderr)
        return EXIT_DATA
    out = Path(args.out)
    stages = tuple(args.stage) if args.stage else STAGES
    jobs = [(m, out, cfg, stages) for m in meetings]
    try:
        if args.jobs > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(args.jobs) as pool:
                results = list(pool.map(_run_one, jobs))
        else:
            results = [_run_one(j) for j in jobs]
    except DataError as exc:
        print(f'error: {exc}', file=sys.stderr)
        return EXIT_DATA
    except StageError as exc:
        print(f'error: {exc}', file=sys.stderr)
        return EXIT_STAGE
    for name, status in results:
        print(name, ' '.join(f'{k}={v}' for k, v in status.items()))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    try:
        report = evaluate_dirs(args.truth, args.hyp)
    except DataError as exc:
        print(f'error: {exc}', file=sys.stderr)
        return EXIT_DATA
    text = json.dumps(report, indent=2, sort_keys=True) + '\n'
    if args.out:
        Path(args.out).write_text(text)
    print(format_report(report), end='')
    return EXIT_OK


def cmd_metrics(args) -> int:
    try:
        ref = read_segment_json(args.ref)
        hyp = read_segment_json(args.hyp)
    except (OSError, ValueError) as exc:
        print(f'error: {exc}', file=sys.stderr)
        return EXIT_DATA
    print(json.dumps(_report_entry(evaluate_meeting(ref, hyp)), indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='cssad', description=__doc__.splitlines()[0])
    parser.add_argument('-v', '--verbose', action='store_true')
    sub = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)

    p = sub.add_parser('simulate', help='generate a synthetic meeting corpus')
    p.add_argument('spec', help='JSON corpus spec: {"num_meetings", "seed", "mix": {...}}')
    p.add_argument('out', help='output directory')
    p.add_argument('--seed', type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser('run', help='separate, recognize and diarize meetings')
    p.add_argument('meetings', help='a meeting directory or a directory of meetings')
    p.add_argument('out', help='output directory')
    p.add_argument('--config')
    p.add_argument('--scheme', choices=SCHEMES)
    p.add_argument('--seed', type=int)
    p.add_argument('--jobs', type=int, default=1)
    p.add_argument('--stage', action='append', choices=STAGES,
                   help='run only this stage (repeatable)')
    p.set_defaults(func=cmd_run)

    p = sub.add_parser('evaluate', help='score a hypothesis directory against the truth')
    p.add_argument('truth')
    p.add_argument('hyp')
    p.add_argument('--out', help='write the JSON report here')
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser('metrics', help='score one hypothesis segment-JSON file')
    p.add_argument('ref')
    p.add_argument('hyp')
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s')
    return args.func(args)


if __name__ == '__main__':
    sys.exit(main())
