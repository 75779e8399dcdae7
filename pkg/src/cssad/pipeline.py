"""End-to-end orchestration: configuration, per-meeting stages, evaluation.

A meeting directory holds ``mixture.wav``, ``truth.json`` (segment-JSON,
one line per utterance) and ``src<N>.wav`` for speaker ``spk<N>``. Running
the pipeline writes, per meeting::

    <id>.stream0.wav, <id>.stream1.wav   separated streams
    vad.json, vad.rttm                   VAD segments (speaker "unk")
    transcripts.json                     one line per VAD segment
    diarized.rttm, words.json            labeled sub-segments with words

Every stage records a content hash of its inputs and settings in
``stages.json`` and is skipped when nothing changed.
"""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .core import AudioSignal, SpeakerSegment, TimeInterval
from .css import CssConfig, OracleSeparator, PassthroughSeparator, StreamPair, run_css
from .diarize import SCHEMES, ChangeDetectConfig, FileExtractor, MockExtractor, diarize_pipeline
from .io import (SegmentRecord, read_segment_json, read_wav, records_from_utterances,
                 utterances_from_records, write_rttm, write_segment_json, write_wav)
from .metrics import DerStats, WerStats, cp_wer, der, orc_wer
from .mixgen import MeetingTruth, MixSpec, generate_meeting
from .transcript import FileRecognizer, OracleRecognizer, SegmentTranscript, transcribe_segments
from .vad import VadConfig, detect_segments

__all__ = [
    'PipelineConfig',
    'BackendConfig',
    'StageError',
    'DataError',
    'load_config',
    'save_meeting',
    'load_meeting',
    'simulate_corpus',
    'process_meeting',
    'compare_schemes',
    'score_meeting',
    'run_meeting',
    'evaluate_meeting',
    'evaluate_dirs',
    'STAGES',
]

logger = logging.getLogger(__name__)

STAGES = ('css', 'vad', 'asr', 'diarize')


class DataError(Exception):
    """Bad or missing input data."""


class StageError(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(f'stage {stage!r} failed: {message}')
        self.stage = stage


@dataclass(frozen=True)
class BackendConfig:
    separator: str = 'oracle'          # oracle | passthrough | file
    separator_path: str = ''           # file: directory holding <id>.stream{0,1}.wav
    recognizer: str = 'oracle'         # oracle | file
    recognizer_path: str = ''          # file: segment-JSON, '{meeting}' is substituted
    word_drop: float = 0.0
    jitter: float = 0.0
    sentence_drop: float = 0.0
    extractor: str = 'mock'            # mock | file
    extractor_path: str = ''
    sigma: float = 0.0
    dim: int = 64


@dataclass(frozen=True)
class PipelineConfig:
    css: CssConfig = CssConfig()
    vad: VadConfig = VadConfig()
    scheme: str = 'sentence+word'
    change_detect: ChangeDetectConfig = ChangeDetectConfig()
    k_speakers: int = 8
    seed: int = 0
    backends: BackendConfig = BackendConfig()

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f'unknown scheme {self.scheme!r}; choose from {", ".join(SCHEMES)}')
        if self.k_speakers < 1:
            raise ValueError('k_speakers must be positive')

    def replace(self, **kw) -> 'PipelineConfig':
        return dataclasses.replace(self, **kw)


_SECTIONS = {
    'css': ('css', CssConfig),
    'vad': ('vad', VadConfig),
    'change_detect': ('change_detect', ChangeDetectConfig),
    'backends': ('backends', BackendConfig),
}


def _coerce(value: str, template):
    if isinstance(template, bool):
        return value.strip().lower() in ('1', 'true', 'yes', 'on')
    if isinstance(template, int):
        return int(value)
    if isinstance(template, float):
        return float(value)
    return value.strip()


def load_config(path=None, overrides: Optional[dict] = None) -> PipelineConfig:
    """Read an INI file with sections ``[pipeline]``, ``[css]``, ``[vad]``,
    ``[change_detect]`` and ``[backends]``. Missing keys keep their defaults."""
    cfg = PipelineConfig()
    if path is not None:
        parser = configparser.ConfigParser()
        if not parser.read(path):
            raise DataError(f'cannot read config file {path}')
        top = {}
        for section in parser.sections():
            items = dict(parser[section])
            if section == 'pipeline':
                for key, value in items.items():
                    if key not in ('scheme', 'k_speakers', 'seed'):
                        raise DataError(f'{path}: unknown key [pipeline] {key}')
                    top[key] = _coerce(value, getattr(cfg, key))
            elif section in _SECTIONS:
                attr, cls = _SECTIONS[section]
                current = getattr(cfg, attr)
                kw = {}
                for key, value in items.items():
                    if not hasattr(current, key):
                        raise DataError(f'{path}: unknown key [{section}] {key}')
                    kw[key] = _coerce(value, getattr(current, key))
                top[attr] = dataclasses.replace(current, **kw)
            else:
                raise DataError(f'{path}: unknown section [{section}]')
        cfg = dataclasses.replace(cfg, **top)
    if overrides:
        cfg = dataclasses.replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    return cfg


def config_to_dict(cfg: PipelineConfig) -> dict:
    return dataclasses.asdict(cfg)


# ---------------------------------------------------------------- corpus IO

def save_meeting(truth: MeetingTruth, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_wav(d / 'mixture.wav', truth.mixture)
    for spk in truth.speakers:
        write_wav(d / f'src{_speaker_index(spk)}.wav', truth.sources[spk])
    write_segment_json(d / 'truth.json', records_from_utterances(truth.session_id, truth.utterances))
    return d


def _speaker_index(label: str) -> int:
    m = re.fullmatch(r'spk(\d+)', label)
    if not m:
        raise DataError(f'speaker label {label!r} is not of the form spk<N>')
    return int(m.group(1))


def load_meeting(directory, need_sources: bool = True) -> MeetingTruth:
    d = Path(directory)
    if not (d / 'mixture.wav').exists():
        raise DataError(f'{d}: no mixture.wav')
    mixture = read_wav(d / 'mixture.wav')
    records = read_segment_json(d / 'truth.json') if (d / 'truth.json').exists() else []
    sources = {}
    if need_sources:
        for p in sorted(d.glob('src*.wav')):
            m = re.fullmatch(r'src(\d+)\.wav', p.name)
            if m:
                sources[f'spk{int(m.group(1))}'] = read_wav(p)
    utterances = sorted(utterances_from_records(records), key=lambda u: u.interval.start)
    session = records[0].session_id if records else d.name
    return MeetingTruth(tuple(utterances), sources, mixture, len(sources) or
                        len({u.speaker for u in utterances}), session)


def simulate_corpus(spec: dict, out_dir) -> list:
    """Write ``num_meetings`` simulated meetings; meeting ``i`` uses seed ``seed + i``."""
    out = Path(out_dir)
    n = int(spec.get('num_meetings', 1))
    base_seed = int(spec.get('seed', 0))
    mix = dict(spec.get('mix', {}))
    for key in ('utterance_duration_range', 'silence_range'):
        if key in mix:
            mix[key] = tuple(mix[key])
    written = []
    for i in range(n):
        meeting_id = f'meeting_{i:03d}'
        truth = generate_meeting(MixSpec(seed=base_seed + i, **mix), session_id=meeting_id)
        written.append(save_meeting(truth, out / meeting_id))
    return written


# ---------------------------------------------------------------- in-memory pipeline

@dataclass
class MeetingArtifacts:
    streams: StreamPair
    vad_segments: list
    transcripts: list
    diarization: object


def _separator(cfg: PipelineConfig, truth):
    name = cfg.backends.separator
    if name == 'oracle':
        return OracleSeparator(truth)
    if name == 'passthrough':
        return PassthroughSeparator()
    raise ValueError(f'separator backend {name!r} cannot run in memory')


def _recognizer(cfg: PipelineConfig, truth, meeting_id: str = ''):
    b = cfg.backends
    if b.recognizer == 'oracle':
        return OracleRecognizer(truth, word_drop=b.word_drop, jitter=b.jitter,
                                sentence_drop=b.sentence_drop, seed=cfg.seed)
    if b.recognizer == 'file':
        return FileRecognizer(b.recognizer_path.format(meeting=meeting_id))
    raise ValueError(f'unknown recognizer backend {b.recognizer!r}')


def _extractor(cfg: PipelineConfig, truth, meeting_id: str = ''):
    b = cfg.backends
    if b.extractor == 'mock':
        return MockExtractor(truth, sigma=b.sigma, dim=b.dim, seed=cfg.seed)
    if b.extractor == 'file':
        return FileExtractor(b.extractor_path.format(meeting=meeting_id))
    raise ValueError(f'unknown extractor backend {b.extractor!r}')


def _vad(streams, cfg):
    return [s for c in (0, 1) for s in detect_segments(streams[c], c, cfg.vad)]


def process_meeting(truth: MeetingTruth, cfg: PipelineConfig = PipelineConfig()) -> MeetingArtifacts:
    """Run every stage in memory on one meeting."""
    streams = run_css(truth.mixture, _separator(cfg, truth), cfg.css, truth=truth)
    segments = _vad(streams, cfg)
    transcripts = transcribe_segments(streams, segments, _recognizer(cfg, truth, truth.session_id))
    result = diarize_pipeline(streams, segments, transcripts, cfg.scheme,
                              _extractor(cfg, truth, truth.session_id),
                              cfg.k_speakers, cfg.seed, cfg.change_detect)
    return MeetingArtifacts(streams, segments, transcripts, result)


def compare_schemes(truth: MeetingTruth, cfg: PipelineConfig = PipelineConfig(),
                    schemes=SCHEMES) -> dict:
    """Separate, detect and transcribe once, then diarize with every scheme.

    Returns ``{scheme: DiarizationResult}``.
    """
    streams = run_css(truth.mixture, _separator(cfg, truth), cfg.css, truth=truth)
    segments = _vad(streams, cfg)
    transcripts = transcribe_segments(streams, segments, _recognizer(cfg, truth, truth.session_id))
    extractor = _extractor(cfg, truth, truth.session_id)
    return {scheme: diarize_pipeline(streams, segments, transcripts, scheme, extractor,
                                     cfg.k_speakers, cfg.seed, cfg.change_detect)
            for scheme in schemes}


def score_meeting(truth: MeetingTruth, result) -> dict:
    """ORC WER, cpWER and DER of an in-memory diarization result."""
    return evaluate_meeting(records_from_utterances(truth.session_id, truth.utterances),
                            _hyp_records(truth.session_id, result))


# ---------------------------------------------------------------- on-disk stages

def _hash_files(paths) -> str:
    h = hashlib.sha256()
    for p in paths:
        p = Path(p)
        h.update(p.name.encode())
        h.update(p.read_bytes() if p.exists() else b'<missing>')
    return h.hexdigest()


def _stage_key(stage: str, settings: dict, inputs) -> str:
    h = hashlib.sha256()
    h.update(stage.encode())
    h.update(json.dumps(settings, sort_keys=True, default=str).encode())
    h.update(_hash_files(inputs).encode())
    return h.hexdigest()


def _hyp_records(session_id, result) -> list:
    return [SegmentRecord(session_id, s.speaker, s.channel, s.interval, s.words)
            for s in result.subsegments]


def run_meeting(meeting_dir, out_dir, cfg: PipelineConfig = PipelineConfig(),
                stages=STAGES) -> dict:
    """Run the requested stages for one meeting directory, reusing cached results.

    Returns ``{stage: 'ran' | 'cached' | 'skipped'}``.
    """
    meeting_dir, out_dir = Path(meeting_dir), Path(out_dir)
    if not meeting_dir.is_dir():
        raise DataError(f'meeting directory {meeting_dir} does not exist')
    if not (meeting_dir / 'mixture.wav').exists():
        raise DataError(f'{meeting_dir}: no mixture.wav')
    out_dir.mkdir(parents=True, exist_ok=True)
    mid = meeting_dir.name
    manifest_path = out_dir / 'stages.json'
    manifest = json.loads(manifest_path.read_text()) if manifest_path.exists() else {}
    old_manifest = dict(manifest)
    status = {}

    truth_files = [meeting_dir / 'mixture.wav', meeting_dir / 'truth.json',
                   *sorted(meeting_dir.glob('src*.wav'))]
    stream_files = [out_dir / f'{mid}.stream0.wav', out_dir / f'{mid}.stream1.wav']
    vad_json, vad_rttm = out_dir / 'vad.json', out_dir / 'vad.rttm'
    tr_json = out_dir / 'transcripts.json'
    dia_rttm, words_json = out_dir / 'diarized.rttm', out_dir / 'words.json'
    b = cfg.backends

    truth_cache = {}

    def truth():
        if 'truth' not in truth_cache:
            truth_cache['truth'] = load_meeting(meeting_dir)
        return truth_cache['truth']

    def streams():
        return StreamPair(tuple(read_wav(p) for p in stream_files))

    def vad_segments():
        return [SpeakerSegment(r.channel, r.interval) for r in read_segment_json(vad_json)]

    plan = {
        'css': (dataclasses.asdict(cfg.css) | {'separator': b.separator, 'path': b.separator_path},
                truth_files, stream_files),
        'vad': (dataclasses.asdict(cfg.vad), stream_files, [vad_json, vad_rttm]),
        'asr': ({k: getattr(b, k) for k in ('recognizer', 'recognizer_path', 'word_drop',
                                            'jitter', 'sentence_drop')} | {'seed': cfg.seed},
                truth_files + stream_files + [vad_json], [tr_json]),
        'diarize': (dataclasses.asdict(cfg.change_detect) | {
            'scheme': cfg.scheme, 'k': cfg.k_speakers, 'seed': cfg.seed,
            'extractor': b.extractor, 'extractor_path': b.extractor_path,
            'sigma': b.sigma, 'dim': b.dim},
            truth_files + stream_files + [vad_json, tr_json], [dia_rttm, words_json]),
    }

    for stage in STAGES:
        if stage not in stages:
            status[stage] = 'skipped'
            continue
        settings, inputs, outputs = plan[stage]
        key = _stage_key(stage, settings, inputs)
        if manifest.get(stage) == key and all(p.exists() for p in outputs):
            status[stage] = 'cached'
            continue
        try:
            if stage == 'css':
                if b.separator == 'file':
                    src = Path(b.separator_path.format(meeting=mid))
                    pair = [read_wav(src / f'{mid}.stream{c}.wav') for c in (0, 1)]
                else:
                    t = truth()
                    pair = run_css(t.mixture, _separator(cfg, t), cfg.css, truth=t).streams
                for p, s in zip(stream_files, pair):
                    write_wav(p, s)
            elif stage == 'vad':
                segs = _vad(streams(), cfg)
                write_segment_json(vad_json, [SegmentRecord(mid, None, s.channel, s.interval)
                                              for s in segs])
                write_rttm(vad_rttm, mid, segs)
            elif stage == 'asr':
                rec = _recognizer(cfg, truth() if b.recognizer == 'oracle' else None, mid)
                trs = transcribe_segments(streams(), vad_segments(), rec)
                write_segment_json(tr_json, [SegmentRecord(mid, None, t.channel, t.segment_interval,
                                                           t.words) for t in trs])
            elif stage == 'diarize':
                segs = vad_segments()
                trs = [SegmentTranscript(r.channel, r.interval, r.words)
                       for r in read_segment_json(tr_json)]
                ext = _extractor(cfg, truth() if b.extractor == 'mock' else None, mid)
                result = diarize_pipeline(streams(), segs, trs, cfg.scheme, ext,
                                          cfg.k_speakers, cfg.seed, cfg.change_detect)
                write_rttm(dia_rttm, mid, result.segments)
                write_segment_json(words_json, _hyp_records(mid, result))
        except (DataError, StageError):
            raise
        except Exception as exc:
            raise StageError(stage, f'{type(exc).__name__}: {exc}') from exc
        manifest[stage] = key
        status[stage] = 'ran'

    if manifest != old_manifest:
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + '\n')
    return status


# ---------------------------------------------------------------- evaluation

def evaluate_meeting(truth_records, hyp_records, exhaustive_limit: int = 20) -> dict:
    """ORC WER, cpWER and DER for one meeting given segment-JSON records."""
    utts = sorted(utterances_from_records(truth_records), key=lambda u: u.interval.start)
    ref_by_spk = {}
    for u in utts:
        ref_by_spk.setdefault(u.speaker, []).extend(w.text for w in u.words)

    # Hypothesis words are concatenated record by record in start-time order,
    # the same convention as the reference utterances.
    streams = {}
    hyp_by_label = {}
    for r in sorted(hyp_records, key=lambda r: (r.interval.start, r.interval.end)):
        texts = [w.text for w in r.words]
        streams.setdefault(r.channel if r.channel is not None else 0, []).extend(texts)
        hyp_by_label.setdefault(r.speaker if r.speaker is not None else 'unk', []).extend(texts)
    hyp_streams = [streams[c] for c in sorted(streams)] or [[]]

    orc = orc_wer(utts, hyp_streams, exhaustive_limit=exhaustive_limit)
    cp = cp_wer(ref_by_spk, hyp_by_label)
    ref_segs = [SpeakerSegment(None, u.interval, u.speaker) for u in utts]
    hyp_segs = [SpeakerSegment(None, r.interval, r.speaker or 'unk') for r in hyp_records]
    d = der(ref_segs, hyp_segs)
    return {'orc_wer': orc, 'cp_wer': cp, 'der': d}


def _report_entry(stats: dict) -> dict:
    return {'orc_wer': stats['orc_wer'].to_dict(), 'cp_wer': stats['cp_wer'].to_dict(),
            'der': stats['der'].to_dict()}


def evaluate_dirs(truth_dir, hyp_dir) -> dict:
    """Score every meeting; pooled figures sum errors over meetings.

    Raises :class:`DataError` listing meeting ids present on only one side.
    """
    truth_dir, hyp_dir = Path(truth_dir), Path(hyp_dir)
    if not truth_dir.is_dir() or not hyp_dir.is_dir():
        raise DataError(f'missing directory: {truth_dir if not truth_dir.is_dir() else hyp_dir}')
    truth_ids = {p.parent.name for p in truth_dir.glob('*/truth.json')}
    hyp_ids = {p.parent.name for p in hyp_dir.glob('*/words.json')}
    if truth_ids != hyp_ids:
        missing = sorted(truth_ids - hyp_ids)
        extra = sorted(hyp_ids - truth_ids)
        raise DataError(f'meeting id mismatch: missing hypotheses {missing}, '
                        f'unknown hypotheses {extra}')
    meetings = {}
    pooled = {'orc_wer': WerStats(), 'cp_wer': WerStats(), 'der': DerStats()}
    for mid in sorted(truth_ids):
        stats = evaluate_meeting(read_segment_json(truth_dir / mid / 'truth.json'),
                                 read_segment_json(hyp_dir / mid / 'words.json'))
        meetings[mid] = _report_entry(stats)
        for k in pooled:
            pooled[k] = pooled[k] + stats[k]
    macro = {}
    if meetings:
        macro = {
            'orc_wer': sum(m['orc_wer']['wer'] for m in meetings.values()) / len(meetings),
            'cp_wer': sum(m['cp_wer']['wer'] for m in meetings.values()) / len(meetings),
            'der': sum(m['der']['der'] for m in meetings.values()) / len(meetings),
        }
    return {'meetings': meetings, 'pooled': _report_entry(pooled), 'macro': macro}


def format_report(report: dict) -> str:
    """Aligned plain-text table of a report from :func:`evaluate_dirs`."""
    rows = [('meeting', 'ORC WER', 'cpWER', 'DER')]
    for mid, m in report['meetings'].items():
        rows.append((mid, f"{100 * m['orc_wer']['wer']:.2f}", f"{100 * m['cp_wer']['wer']:.2f}",
                     f"{100 * m['der']['der']:.2f}"))
    p = report['pooled']
    rows.append(('pooled', f"{100 * p['orc_wer']['wer']:.2f}", f"{100 * p['cp_wer']['wer']:.2f}",
                 f"{100 * p['der']['der']:.2f}"))
    width = max(len(r[0]) for r in rows)
    return '\n'.join(f'{r[0]:<{width}}  {r[1]:>8}  {r[2]:>8}  {r[3]:>8}' for r in rows) + '\n'
