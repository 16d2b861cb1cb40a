import hashlib
import tempfile
from contextlib import redirect_stderr, redirect_stdout
from datetime import timedelta
from io import StringIO
from pathlib import Path

from django.test import SimpleTestCase
from django.utils import timezone

from apps.core.exceptions import ConfigurationError, DataFormatError, NonFiniteLossError, TreeError
from apps.core.serializers import RunManifestSerializer
from apps.core.utils import ensure_directory, file_digest, read_text_lines
from manage import main as manage_main


class ExceptionMessageTest(SimpleTestCase):
    """Tests for error messages"""

    def test_data_format_error_location(self):
        self.assertEqual(str(DataFormatError('bad', 'corpus.jsonl', 3)), 'corpus.jsonl:3: bad')
        self.assertEqual(str(DataFormatError('bad', line=3)), 'line 3: bad')
        self.assertEqual(str(DataFormatError('bad')), 'bad')

    def test_tree_error_position(self):
        self.assertEqual(str(TreeError('choice 4 outside 0..1', position='step 2')),
                         'choice 4 outside 0..1 (at step 2)')

    def test_configuration_error_lists_fields(self):
        error = ConfigurationError({'hidden': ['must be positive']})
        self.assertIn('hidden: must be positive', str(error))
        self.assertIsInstance(error, ValueError)

    def test_non_finite_loss_names_document(self):
        self.assertIn("'d7'", str(NonFiniteLossError('d7', 3, float('nan'))))


class FileDigestTest(SimpleTestCase):
    """Tests for file digests"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_matches_sha256(self):
        path = self.dir / 'data.bin'
        data = bytes(range(256)) * 1000
        path.write_bytes(data)
        self.assertEqual(file_digest(path), 'sha256:' + hashlib.sha256(data).hexdigest())

    def test_missing_file(self):
        with self.assertRaises(DataFormatError):
            file_digest(self.dir / 'missing')

    def test_read_text_lines_reports_bad_byte(self):
        path = self.dir / 'data.txt'
        path.write_bytes(b'caf\xc3\xa9\nok\n\xff\n')
        lines = read_text_lines(path)
        self.assertEqual(next(lines), (1, 'caf\u00e9\n'))
        self.assertEqual(next(lines), (2, 'ok\n'))
        with self.assertRaises(DataFormatError) as ctx:
            next(lines)
        self.assertEqual(ctx.exception.line, 3)

    def test_ensure_directory_rejects_file(self):
        path = self.dir / 'file'
        path.write_text('x')
        with self.assertRaises(DataFormatError):
            ensure_directory(path)
        self.assertTrue(ensure_directory(self.dir / 'a' / 'b').is_dir())


class RunManifestSerializerTest(SimpleTestCase):
    """Tests for run manifest validation"""

    def manifest(self, **overrides):
        data = {
            'toolkit_version': '1.0.0',
            'seed': 3,
            'config': {'seed': 3, 'hidden': 8},
            'inputs': {'corpus': {'path': '/tmp/c.jsonl', 'digest': 'sha256:' + '0' * 64}},
            'started_at': timezone.now(),
        }
        data.update(overrides)
        return data

    def test_valid(self):
        serializer = RunManifestSerializer(data=self.manifest())
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertIsNone(serializer.validated_data['finished_at'])

    def test_seed_must_match_config(self):
        serializer = RunManifestSerializer(data=self.manifest(seed=4))
        self.assertFalse(serializer.is_valid())
        self.assertIn('seed', serializer.errors)

    def test_bad_digest(self):
        serializer = RunManifestSerializer(
            data=self.manifest(inputs={'corpus': {'path': 'c', 'digest': 'md5:abc'}})
        )
        self.assertFalse(serializer.is_valid())

    def test_finish_before_start(self):
        started = timezone.now()
        serializer = RunManifestSerializer(
            data=self.manifest(started_at=started, finished_at=started - timedelta(seconds=1))
        )
        self.assertFalse(serializer.is_valid())
        self.assertIn('finished_at', serializer.errors)


class CommandLineExitStatusTest(SimpleTestCase):
    """Tests for manage.main exit statuses: 0 success, 1 data error, 2 usage error"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.trees = self.dir / 'trees.tsv'
        self.trees.write_text('d1\t( ( 0 1 ) ( 2 3 ) )\n')

    def tearDown(self):
        self.tmp.cleanup()

    def main(self, *args):
        out, err = StringIO(), StringIO()
        with redirect_stdout(out), redirect_stderr(err):
            status = manage_main(['manage.py', *args])
        return status, out.getvalue(), err.getvalue()

    def test_success(self):
        status, out, _ = self.main('stats', '--trees', str(self.trees))
        self.assertEqual(status, 0)
        self.assertIn('d1\t4\t2', out)

    def test_missing_input_is_data_error(self):
        status, _, err = self.main('stats', '--trees', str(self.dir / 'missing.tsv'))
        self.assertEqual(status, 1)
        self.assertIn('missing.tsv', err)

    def test_malformed_input_is_data_error(self):
        self.trees.write_bytes(b'd1\t( 0 1 )\n\xff\n')
        status, _, err = self.main('stats', '--trees', str(self.trees))
        self.assertEqual(status, 1)
        self.assertIn(':2:', err)

    def test_no_subcommand(self):
        status, _, err = self.main()
        self.assertEqual(status, 2)
        self.assertIn('Exit status', err)

    def test_unknown_subcommand(self):
        status, _, err = self.main('bogus')
        self.assertEqual(status, 2)
        self.assertIn("Unknown subcommand 'bogus'", err)

    def test_missing_required_option(self):
        status, _, err = self.main('eval', '--pred', str(self.trees))
        self.assertEqual(status, 2)
        self.assertIn('usage:', err)

    def test_eval_without_prediction(self):
        status, _, err = self.main('eval', '--gold', str(self.trees))
        self.assertEqual(status, 2)
        self.assertIn('usage:', err)
        self.assertIn('--pred or --baseline', err)
