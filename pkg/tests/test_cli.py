import json
from pathlib import Path

from nambukit.cli import EXIT_NEGATIVE, EXIT_PASSED, EXIT_USAGE, main

WORKED_EXAMPLES = Path(__file__).parent.parent / 'sessions' / 'worked_examples.nk'


def _write(tmp_path, text):
    path = tmp_path / 'session.nk'
    path.write_text(text)
    return str(path)


def test_run_passing_session(tmp_path, capsys):
    """Test a session with only positive verdicts exits 0"""
    path = _write(tmp_path, "chart x y z;\nnambu P order 3 = Dx^Dy^Dz;\ncheck-fi P;\n")
    assert main(['run', path]) == EXIT_PASSED
    out = capsys.readouterr().out
    assert '[3] check-fi P' in out
    assert '1 command(s), 0 negative verdict(s)' in out


def test_run_negative_session(tmp_path, capsys):
    """Test a negative verdict exits 1"""
    path = _write(tmp_path, "chart x y z w;\nnambu T order 3 = Dx^Dy^(Dz + x*Dw);\ncheck-fi T;\n")
    assert main(['run', path]) == EXIT_NEGATIVE
    assert 'refuted' in capsys.readouterr().out


def test_json_output(tmp_path, capsys):
    """Test --json emits the report schema"""
    path = _write(tmp_path, "chart x y z;\nnambu P order 2 = z*Dx^Dy;\noracle fi P points 2;\n")
    assert main(['run', path, '--json', '--seed', '4', '--timing']) == EXIT_PASSED
    data = json.loads(capsys.readouterr().out)
    assert data['seed'] == 4
    assert data['entries'][0]['verdict'] == 'match'
    assert 'seconds' in data['entries'][0]


def test_missing_file(tmp_path, capsys):
    """Test an unreadable session file is a usage error"""
    assert main(['run', str(tmp_path / 'missing.nk')]) == EXIT_USAGE
    assert 'cannot read' in capsys.readouterr().err


def test_syntax_error(tmp_path, capsys):
    """Test a parse error is a usage error with its position"""
    path = _write(tmp_path, "chart x y;\nnambu P order = Dx^Dy;\n")
    assert main(['run', path]) == EXIT_USAGE
    assert 'line 2' in capsys.readouterr().err


def test_bad_arguments(capsys):
    """Test unknown options are usage errors"""
    assert main(['run']) == EXIT_USAGE
    assert main(['frobnicate']) == EXIT_USAGE


def test_failed_command(tmp_path, capsys):
    """Test a domain error in a command exits 1"""
    path = _write(tmp_path, "chart x y z w;\nnambu P order 3 = Dx^Dy^Dz;\nform B = x*dy^dz^dw;\ngauge P by B;\n")
    assert main(['run', path]) == EXIT_NEGATIVE
    assert 'line 4' in capsys.readouterr().err


def test_parallel_jobs(tmp_path, capsys):
    """Test sharded checks give the serial report"""
    path = _write(tmp_path, "chart x y z w;\nnambu P order 3 = w*Dx^Dy^Dz;\ncheck-fi P;\n")
    assert main(['run', path, '--jobs', '3']) == EXIT_PASSED
    assert '91 residual checks vanish' in capsys.readouterr().out


def test_worked_examples(capsys):
    """Test the bundled session runs and reports its expected negative verdicts"""
    assert main(['run', str(WORKED_EXAMPLES), '--json']) == EXIT_NEGATIVE
    data = json.loads(capsys.readouterr().out)
    verdicts = {entry['command']: entry['verdict'] for entry in data['entries']}
    assert verdicts['check-fi Twist'] == 'refuted'
    assert verdicts['reduce W on N by E as Q'] == 'reduced'
    assert verdicts['reduce P on Z by Ez with D = Ez'] == 'reduced'
    assert verdicts['reduce P on Z by Zero'] == 'not reducible'
    assert verdicts['canonicity W by E bound 1'] == 'not canonical'
    assert verdicts['commute W by B on N via E'] == 'commutes'
    assert verdicts['gauge P by B as G'] == 'verified'
    assert verdicts['oracle anchor P by B'] == 'match'
    assert verdicts['oracle bracket W'] == 'match'
    assert verdicts['oracle fi W'] == 'match'
    assert verdicts['oracle reduce W on N by E using T'] == 'match'
    assert verdicts['oracle commute W by B on N via E'] == 'match'
    assert 'engine bug' not in verdicts.values()
