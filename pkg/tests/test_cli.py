import json
import shutil
from pathlib import Path

import pytest

from cssad.cli import main
from cssad.pipeline import DataError, PipelineConfig, load_config

SMALL = {'num_meetings': 2, 'seed': 5,
         'mix': {'num_speakers': 3, 'num_utterances': 8, 'overlap_ratio_target': 0.3}}
SCHEMA = json.loads((Path(__file__).parent / 'data' / 'report_schema.json').read_text())


def tree_bytes(root):
    root = Path(root)
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob('*')) if p.is_file()}


@pytest.fixture(scope='module')
def corpus(tmp_path_factory):
    base = tmp_path_factory.mktemp('corpus')
    spec = base / 'spec.json'
    spec.write_text(json.dumps(SMALL))
    assert main(['simulate', str(spec), str(base / 'meetings')]) == 0
    return base


@pytest.fixture(scope='module')
def run_out(corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp('run')
    assert main(['run', str(corpus / 'meetings'), str(out), '--config', _config(corpus)]) == 0
    return out


def _config(corpus):
    path = corpus / 'pipeline.ini'
    path.write_text('[pipeline]\nk_speakers = 3\nscheme = sentence+word\n')
    return str(path)


def test_simulate_layout(corpus):
    meetings = sorted((corpus / 'meetings').iterdir())
    assert [m.name for m in meetings] == ['meeting_000', 'meeting_001']
    for m in meetings:
        names = {p.name for p in m.iterdir()}
        assert {'mixture.wav', 'truth.json', 'src0.wav', 'src1.wav', 'src2.wav'} <= names


def test_simulate_is_reproducible(corpus, tmp_path):
    spec = tmp_path / 'spec.json'
    spec.write_text(json.dumps(SMALL))
    assert main(['simulate', str(spec), str(tmp_path / 'again')]) == 0
    assert tree_bytes(tmp_path / 'again') == tree_bytes(corpus / 'meetings')


def test_simulate_infeasible(tmp_path, capsys):
    spec = tmp_path / 'spec.json'
    spec.write_text(json.dumps({'num_meetings': 1, 'mix': {'num_utterances': 1}}))
    assert main(['simulate', str(spec), str(tmp_path / 'out')]) == 2
    assert 'overlap' in capsys.readouterr().err


def test_run_artifacts(run_out):
    for mid in ('meeting_000', 'meeting_001'):
        names = {p.name for p in (run_out / mid).iterdir()}
        assert {f'{mid}.stream0.wav', f'{mid}.stream1.wav', 'vad.json', 'vad.rttm',
                'transcripts.json', 'diarized.rttm', 'words.json', 'stages.json'} <= names


def test_oracle_run_scores_zero(corpus, run_out, tmp_path, capsys):
    report_path = tmp_path / 'report.json'
    assert main(['evaluate', str(corpus / 'meetings'), str(run_out), '--out', str(report_path)]) == 0
    report = json.loads(report_path.read_text())
    assert report['pooled']['cp_wer']['wer'] == 0.0
    assert report['pooled']['orc_wer']['wer'] == 0.0
    assert report['pooled']['der']['der'] < 0.01
    assert 'pooled' in capsys.readouterr().out


def test_rerun_is_cached(corpus, run_out, capsys):
    before = tree_bytes(run_out)
    mtimes = {p: p.stat().st_mtime_ns for p in run_out.rglob('*') if p.is_file()}
    capsys.readouterr()
    assert main(['run', str(corpus / 'meetings'), str(run_out), '--config', _config(corpus)]) == 0
    assert 'css=cached vad=cached asr=cached diarize=cached' in capsys.readouterr().out
    assert tree_bytes(run_out) == before
    assert {p: p.stat().st_mtime_ns for p in mtimes} == mtimes


def test_changed_setting_reruns_only_later_stages(corpus, run_out, tmp_path, capsys):
    out = tmp_path / 'copy'
    shutil.copytree(run_out, out)
    capsys.readouterr()
    assert main(['run', str(corpus / 'meetings'), str(out), '--config', _config(corpus),
                 '--scheme', 'sentence']) == 0
    assert 'css=cached vad=cached asr=cached diarize=ran' in capsys.readouterr().out


def test_run_is_deterministic(corpus, run_out, tmp_path):
    out = tmp_path / 'second'
    assert main(['run', str(corpus / 'meetings'), str(out), '--config', _config(corpus)]) == 0
    assert tree_bytes(out) == tree_bytes(run_out)


def test_partial_stage(corpus, tmp_path, capsys):
    meeting = corpus / 'meetings' / 'meeting_000'
    assert main(['run', str(meeting), str(tmp_path), '--stage', 'css']) == 0
    assert 'css=ran vad=skipped' in capsys.readouterr().out


def test_run_missing_dir(tmp_path, capsys):
    assert main(['run', str(tmp_path / 'nope'), str(tmp_path / 'out')]) == 2
    assert 'does not exist' in capsys.readouterr().err


def test_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(['run'])
    assert exc.value.code == 1


def _hyp_dir(corpus, tmp_path, empty):
    hyp = tmp_path / 'hyp'
    for m in (corpus / 'meetings').iterdir():
        (hyp / m.name).mkdir(parents=True)
        text = '' if empty else (m / 'truth.json').read_text()
        (hyp / m.name / 'words.json').write_text(text)
    return hyp


def test_evaluate_truth_against_itself(corpus, tmp_path):
    out = tmp_path / 'r.json'
    assert main(['evaluate', str(corpus / 'meetings'), str(_hyp_dir(corpus, tmp_path, False)),
                 '--out', str(out)]) == 0
    report = json.loads(out.read_text())
    for entry in list(report['meetings'].values()) + [report['pooled']]:
        assert entry['orc_wer']['wer'] == entry['cp_wer']['wer'] == entry['der']['der'] == 0.0


def test_evaluate_empty_hypothesis(corpus, tmp_path):
    out = tmp_path / 'r.json'
    assert main(['evaluate', str(corpus / 'meetings'), str(_hyp_dir(corpus, tmp_path, True)),
                 '--out', str(out)]) == 0
    pooled = json.loads(out.read_text())['pooled']
    assert pooled['cp_wer']['wer'] == 1.0 and pooled['der']['der'] == 1.0


def test_report_schema(corpus, run_out, tmp_path):
    out = tmp_path / 'r.json'
    main(['evaluate', str(corpus / 'meetings'), str(run_out), '--out', str(out)])
    report = json.loads(out.read_text())
    assert sorted(report) == SCHEMA['top']
    assert sorted(report['macro']) == SCHEMA['macro']
    for entry in list(report['meetings'].values()) + [report['pooled']]:
        assert {k: sorted(v) for k, v in entry.items()} == SCHEMA['meeting_entry']


def test_evaluate_id_mismatch(corpus, tmp_path, capsys):
    hyp = _hyp_dir(corpus, tmp_path, False)
    shutil.rmtree(hyp / 'meeting_001')
    assert main(['evaluate', str(corpus / 'meetings'), str(hyp)]) == 2
    assert 'meeting_001' in capsys.readouterr().err


def test_metrics_single_file(corpus, capsys):
    truth = corpus / 'meetings' / 'meeting_000' / 'truth.json'
    assert main(['metrics', str(truth), str(truth)]) == 0
    assert json.loads(capsys.readouterr().out)['cp_wer']['wer'] == 0.0


def test_config_loading(tmp_path):
    path = tmp_path / 'c.ini'
    path.write_text('[css]\nsegment_length = 6.0\n[change_detect]\ncontext_words = 4\n'
                    '[backends]\nsigma = 0.5\n')
    cfg = load_config(path, {'seed': 9, 'scheme': None})
    assert cfg.css.segment_length == 6.0 and cfg.change_detect.context_words == 4
    assert cfg.backends.sigma == 0.5 and cfg.seed == 9 and cfg.scheme == 'sentence+word'
    assert load_config() == PipelineConfig()
    path.write_text('[vad]\nbogus = 1\n')
    with pytest.raises(DataError):
        load_config(path)
