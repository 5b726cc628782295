import io, os, copy, json, argparse, tempfile, unittest
from contextlib import redirect_stdout

from nuqkit.nuqkit import nuqkit_run_from_cmd_args, _build_parser
from nuqkit.settings import gSettings
from nuqkit.codec import unpack_stream_file

def _run(*args):
    out = io.StringIO()
    with redirect_stdout(out):
        rc = nuqkit_run_from_cmd_args(['nuqkit'] + list(args))
    return rc, out.getvalue()

def _csv_rows(text):
    lines = [l for l in text.splitlines() if not l.startswith('#')]
    header = lines[0].split(',')
    return header, [dict(zip(header, l.split(','))) for l in lines[1:]]

class TestBoundsCommand(unittest.TestCase):
    def test_bounds(self):
        rc, out = _run('bounds', '--s', '2', '--d', '16')
        self.assertEqual(rc, 0)
        report = json.loads(out)
        self.assertAlmostEqual(report['eps_q'], .375)
        self.assertIsNone(report['n_q'])
        self.assertIn('n_q_error', report)
        self.assertEqual(report['format_version'], 1)

    def test_bounds_ascii(self):
        rc, out = _run('b', '--s', '1', '--d', '4096', '--format', 'ascii')
        self.assertEqual(rc, 0)
        self.assertIn('eps_q', out)

    def test_missing_dimension(self):
        self.assertEqual(_run('bounds', '--s', '2')[0], 1)

    def test_sweep(self):
        rc, out = _run('bounds', '--sweep', '--s-values', '1', '--d-values', '8,4096')
        self.assertEqual(rc, 0)
        header, rows = _csv_rows(out)
        self.assertEqual(header, ['s', 'd', 'p', 'eps_q', 'eps_lp', 'eps_qp', 'n_q'])
        self.assertEqual([r['d'] for r in rows], ['8', '4096'])
        self.assertEqual(rows[0]['n_q'], '')

    def test_optimal_p(self):
        rc, out = _run('optimal-p', '--s', '1', '--d', '16')
        self.assertEqual(rc, 0)
        header, rows = _csv_rows(out)
        self.assertEqual(header, ['s', 'd', 'p_star', 'eps_qp'])
        self.assertTrue(0 < float(rows[0]['p_star']) < 1)

class TestQuantizeCommand(unittest.TestCase):
    def test_quantize(self):
        args = ('quantize', '--input', 'gaussian:256', '--seed', '5', '--levels', '0.5,3')
        rc, out = _run(*args)
        self.assertEqual(rc, 0)
        result = json.loads(out)
        self.assertEqual(result['levels'], [0., .125, .25, .5, 1.])
        self.assertEqual(len(result['buckets']), 1)
        self.assertGreater(result['measured_bits'], 32)
        # reruns are byte-identical
        self.assertEqual(_run(*args)[1], out)

    def test_vector_file_and_stream(self):
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, 'v.txt')
            with open(path, 'w') as f:
                f.write('# gradient\n1.5\n-2\n\n0\n0.25\n')
            streamPath = os.path.join(d, 'v.nuq')
            rc, out = _run('q', '--input', path, '--seed', '1', '--scheme', 'qsgd_inf'
                    , '--bucket', '2', '--stream-out', streamPath)
            self.assertEqual(rc, 0)
            result = json.loads(out)
            self.assertEqual(result['bucket_size'], 2)
            self.assertEqual(len(result['buckets']), 2)
            self.assertEqual(len(unpack_stream_file(streamPath)), result['measured_bits'])

    def test_usage_errors(self):
        self.assertEqual(_run('quantize', '--input', 'gaussian:64', '--levels', '1.5,2', '--seed', '1')[0], 1)
        self.assertEqual(_run('quantize', '--input', 'gaussian:64')[0], 1)
        self.assertEqual(_run('quantize', '--input', 'gaussian:x', '--seed', '1')[0], 1)
        self.assertEqual(_run('quantize', '--input', '/no/such/vector.txt', '--seed', '1')[0], 1)
        self.assertEqual(_run('no-such-command')[0], 1)

    def test_precondition(self):
        # uniform levels cannot use logarithmic level codes
        rc, _ = _run('quantize', '--input', 'gaussian:64', '--seed', '1', '--scheme', 'qsgd_l2'
                , '--levels', '0.5,3', '--level-code-mode', 'log_power_of_two')
        self.assertEqual(rc, 3)

class TestCodecBenchCommand(unittest.TestCase):
    def test_bench(self):
        rc, out = _run('codec-bench', '--d', '64', '--s', '1', '--n', '20', '--seed', '0')
        self.assertEqual(rc, 0)
        result = json.loads(out)
        self.assertEqual([m['mode'] for m in result['modes']],
                ['log_power_of_two', 'level_index', 'huffman'])
        # both Elias modes write the same codewords for power-of-half levels
        self.assertEqual(result['modes'][0]['mean_bits'], result['modes'][1]['mean_bits'])

    def test_bench_ascii(self):
        rc, out = _run('bench', '--d', '64', '--s', '1', '--n', '5', '--seed', '0'
                , '--modes', 'level_index', '--format', 'ascii')
        self.assertEqual(rc, 0)
        self.assertIn('Mode', out)

class TestLabCommands(unittest.TestCase):
    def test_variance(self):
        rc, out = _run('variance', '--d', '16', '--count', '1', '--s-values', '1'
                , '--schemes', 'nuq', '--n', '200', '--seed', '0')
        self.assertEqual(rc, 0)
        header, rows = _csv_rows(out)
        self.assertEqual(len(rows), 3)
        self.assertEqual(header[0], 'vector_id')

    def test_separate(self):
        rc, out = _run('separate', '--s', '1', '--d', '1024', '--K1', '2', '--K2', '1.5')
        self.assertEqual(rc, 0)
        self.assertTrue(json.loads(out)['gap_1_over_s']['separated'])
        self.assertEqual(_run('separate', '--s', '1', '--d', '16', '--K1', '5', '--K2', '1')[0], 3)
        self.assertEqual(_run('separate', '--s', '1')[0], 1)

class TestSimulateCommand(unittest.TestCase):
    def test_full_precision(self):
        rc, out = _run('simulate', '--d', '8', '--T', '20', '--seed', '3')
        self.assertEqual(rc, 0)
        header, rows = _csv_rows(out)
        self.assertEqual(header, ['iteration', 'objective', 'grad_norm', 'bits', 'disagreement',
                'local_spread'])
        self.assertEqual(len(rows), 21)
        self.assertTrue(all('0' == r['bits'] for r in rows))
        self.assertLess(float(rows[-1]['objective']), float(rows[0]['objective']))

    def test_quantized_reruns_identical(self):
        args = ('sim', '--d', '16', '--T', '15', '--K', '2', '--batch', '1', '--alpha', '0.05'
                , '--scheme', 'nuq', '--s', '3', '--seed', '9')
        rc, out = _run(*args)
        self.assertEqual(rc, 0)
        _, rows = _csv_rows(out)
        self.assertEqual(rows[0]['bits'], '0')
        self.assertTrue(all(int(r['bits']) > 0 for r in rows[1:]))
        self.assertEqual(_run(*args)[1], out)

    def test_runners(self):
        for run, extra in ( ('momentum', ('--momentum', '0.5', '--mode', '1'))
                          , ('async', ('--async', '2', '--K', '2'))
                          , ('ecd_psgd', ('--topology', 'ring', '--K', '4'))
                          , ('data_parallel', ('--schedule', 'inverse-sqrt'))
                          ):
            rc, out = _run('simulate', '--d', '8', '--T', '10', '--seed', '1', *extra)
            self.assertEqual(rc, 0, extra)
            self.assertIn(f'# run: "{run}"', out)
            self.assertEqual(len(_csv_rows(out)[1]), 11)

    def test_output_files(self):
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, 'trace.csv')
            rc, out = _run('simulate', '--d', '8', '--T', '5', '--seed', '2', '-o', path)
            self.assertEqual(rc, 0)
            self.assertEqual(out, '')
            with open(path) as f:
                self.assertEqual(len(_csv_rows(f.read())[1]), 6)
            with open(path + '.meta.json') as f:
                meta = json.load(f)
            self.assertEqual(meta['run'], 'data_parallel')
            self.assertEqual(meta['problem']['problem'], 'least_squares')

    def test_errors(self):
        self.assertEqual(_run('simulate', '--d', '8')[0], 1)
        self.assertEqual(_run('simulate', '--d', '8', '--seed', '1', '--alpha', '-1')[0], 1)
        self.assertEqual(_run('simulate', '--d', '8', '--seed', '1', '--scheme', 'nuq',
                '--p', '1.5')[0], 3)
        self.assertEqual(_run('simulate', '--d', '8', '--seed', '1', '--momentum', '1')[0], 3)
        for flags in (('--momentum', '0.5', '--async', '2'), ('--topology', 'ring', '--async', '1')
                     , ('--momentum', '0.5', '--topology', 'ring')):
            self.assertEqual(_run('simulate', '--d', '8', '--K', '4', '--seed', '1', *flags)[0], 1
                    , flags)

class TestCommonOptions(unittest.TestCase):
    def setUp(self):
        self._saved = copy.deepcopy(gSettings)

    def tearDown(self):
        gSettings.clear()
        gSettings.update(self._saved)

    def test_settings_file_bucket_size(self):
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, 'settings.json')
            with open(path, 'w') as f:
                json.dump({'bucket-size': 16}, f)
            rc, out = _run('-c', path, 'quantize', '--input', 'gaussian:64', '--seed', '1')
        self.assertEqual(rc, 0)
        result = json.loads(out)
        self.assertEqual(result['bucket_size'], 16)
        self.assertEqual(len(result['buckets']), 4)

    def test_every_option_documented(self):
        parser = _build_parser()
        subparsers = [a for a in parser._actions if isinstance(a, argparse._SubParsersAction)][0]
        for name, sub in [('nuqkit', parser)] + sorted(subparsers.choices.items()):
            for action in sub._actions:
                if isinstance(action, (argparse._HelpAction, argparse._SubParsersAction)):
                    continue
                self.assertTrue(action.help, (name, action.option_strings))
