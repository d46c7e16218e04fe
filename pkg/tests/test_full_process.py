import os
import shutil
import subprocess

import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SCRIPT = os.path.join(ROOT, 'mpstance_full_process.sh')


@pytest.mark.skipif(shutil.which('bash') is None, reason='bash indisponible')
def test_config_path_is_a_positional_argument(tmp_path):
    env = dict(os.environ, MPSTANCE_CONFIG=str(tmp_path / 'ignored.toml'))
    result = subprocess.run(
        ['bash', SCRIPT, str(tmp_path / 'missing.jsonl'), str(tmp_path / 'out'), str(tmp_path / 'run.toml')],
        capture_output=True, text=True, env=env, cwd=tmp_path,
    )
    assert result.returncode == 1
    assert 'non trouvé' in result.stdout
    assert '[config.toml]' in result.stdout
    assert not (tmp_path / 'out').exists()


def test_script_reads_no_environment_variable():
    with open(SCRIPT, encoding='utf-8') as f:
        script = f.read()
    assert 'MPSTANCE_' not in script
    assert 'CONFIG="${3:-' in script
