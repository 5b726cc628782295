#!/usr/bin/env python3

import os, sys, logging, math
import traceback, argparse
import prettytable
import numpy as np

from nuqkit.settings import read_settings_file, gSettings
from nuqkit.errors import NuqkitError, UsageError, PreconditionError
from nuqkit.random_source import RandomSource
from nuqkit.quantizer import LevelSequence, levels_exponential, scheme_levels, gSchemes \
        , as_bucket_spec, quantize_bucketed, closed_form_variance_bucketed, expected_nnz
from nuqkit.codec import gFormatVersion, gLevelCodeModes, CodecConfig, encode_buckets \
        , decode_buckets, measured_bits, pack_stream_file
from nuqkit.huffman import huffman_from_sample
from nuqkit.bounds import bound_report, bound_sweep, gSweepColumns, optimal_p, code_length_bound
from nuqkit.variance_lab import variance_corpus, gCorpusColumns, SeparationInputs \
        , separation_report, find_separation_inputs
from nuqkit.problems import instantiate_problem
from nuqkit.simulator import SimConfig, gRunners, gSimSchemes
from nuqkit.utils import write_csv, write_json, read_vector_file, bits_fmt, progress_bar

#                                                                     ________
# __________________________________________________________________/ Actions
#
# Entry point forwards execution to one of these functions; each writes its
# payload to ``outStream`` and returns exit code.

def _input_vector(spec, seed):
    """
    Vector from generator spec "gaussian:<d>", "sparse:<d>:<k>" or from
    newline-delimited file.
    """
    parts = spec.split(':')
    if parts[0] in ('gaussian', 'sparse') and not os.path.isfile(spec):
        try:
            dims = [int(x) for x in parts[1:]]
        except ValueError:
            raise UsageError(f'Malformed generator spec "{spec}"')
        gen = RandomSource(seed).child(0xfeed).generator()
        if 'gaussian' == parts[0] and 1 == len(dims) and dims[0] > 0:
            return gen.standard_normal(dims[0])
        if 'sparse' == parts[0] and 2 == len(dims) and 0 <= dims[1] <= dims[0] > 0:
            v = np.zeros(dims[0])
            v[gen.choice(dims[0], size=dims[1], replace=False)] = gen.standard_normal(dims[1])
            return v
        raise UsageError(f'Malformed generator spec "{spec}", expected gaussian:<d>'
                ' or sparse:<d>:<k>')
    return read_vector_file(spec)

def _levels_of(scheme, p, s, levels):
    normalization, L = scheme_levels(scheme, s, p)
    if levels is not None:
        L = LevelSequence(levels)
    return normalization, L

def quantize_action(outStream, inputSpec, scheme, p, s, levels, bucket, seed,
        floatBits=None, levelCodeMode=None, streamOut=None):
    L = logging.getLogger(__name__)
    v = _input_vector(inputSpec, seed)
    normalization, levels_ = _levels_of(scheme, p, s, levels)
    if bucket is None: bucket = gSettings['bucket-size']
    bucketSpec = as_bucket_spec(bucket, v.size)
    qs = quantize_bucketed(v, bucketSpec, normalization, levels_, RandomSource(seed))
    cfg = CodecConfig(floatBits, levelCodeMode)
    stream = encode_buckets(qs, levels_, cfg)
    if decode_buckets(stream, v.size, bucketSpec, levels_, cfg) != [q.rounded(cfg.floatBits) for q in qs]:
        raise NuqkitError('Encoded gradient does not decode to itself')
    if streamOut:
        pack_stream_file(streamOut, stream)
    nBits = measured_bits(stream)
    L.info(f'{v.size} coordinates quantized into {sum(q.nnz for q in qs)} entries,'
           f' {bits_fmt(nBits)}')
    write_json(outStream, { 'format_version': gFormatVersion
            , 'scheme': scheme
            , 'normalization': normalization
            , 'levels': list(levels_.levels)
            , 'bucket_size': bucketSpec.bucketSize
            , 'codec': cfg.to_dict()
            , 'seed': seed
            , 'buckets': [q.to_dict() for q in qs]
            , 'closed_form_variance': closed_form_variance_bucketed(v, bucketSpec, normalization, levels_)
            , 'expected_nnz': sum(expected_nnz(v[sl], levels_, normalization)
                    for sl in bucketSpec.slices(v.size))
            , 'measured_bits': nBits
            , 'norm2': float(v @ v)
            })
    return 0

def codec_bench(outStream, d, s, n, seed, modes, p=.5, b=32, format_='json'):
    """
    Encodes ``n`` quantized Gaussian gradients per level code mode, checks
    roundtrip and compares mean bits with the code length bound.
    """
    L = logging.getLogger(__name__)
    levels = levels_exponential(p, s)
    root = RandomSource(seed)
    vectors = [root.child(0, k).generator().standard_normal(d) for k in range(n)]
    quantized = [quantize_bucketed(v, None, 'l2', levels, root.child(1, k)) for k, v in enumerate(vectors)]
    try:
        nQ = code_length_bound(s, d, b)
    except PreconditionError as e:
        L.info(f'Code length bound undefined: {e}')
        nQ = None
    rows = []
    for mode in modes:
        cfg = CodecConfig(b, mode if 'huffman' != mode else 'level_index')
        if 'huffman' == mode:
            sample = [int(j) for qs in quantized[:max(1, n//10)] for q in qs for j in q.levelIndices]
            cfg = cfg.with_codebook(huffman_from_sample(sample, s + 1))
        bits = []
        for qs in progress_bar(quantized, mode, total=n):
            stream = encode_buckets(qs, levels, cfg)
            if decode_buckets(stream, d, as_bucket_spec(None, d), levels, cfg) != [q.rounded(b) for q in qs]:
                raise NuqkitError(f'Roundtrip failed in "{mode}" mode')
            bits.append(measured_bits(stream))
        bits = np.array(bits, dtype=float)
        rows.append({ 'mode': mode
                    , 'mean_bits': float(bits.mean())
                    , 'max_bits': int(bits.max())
                    , 'stderr': float(bits.std(ddof=1)/math.sqrt(n)) if n > 1 else 0.
                    , 'n_q': nQ
                    , 'full_precision_bits': b*d
                    , 'within_bound': None if nQ is None else bool(bits.mean() <= nQ)
                    })
    if 'ascii' == format_:
        pTable = prettytable.PrettyTable()
        pTable.field_names = ['Mode', 'Mean', 'Max', 'N_Q', 'Full precision']
        pTable.align['Mode'] = 'l'
        for r in rows:
            pTable.add_row([ r['mode'], bits_fmt(r['mean_bits']), bits_fmt(r['max_bits'])
                           , 'N/A' if nQ is None else bits_fmt(nQ), bits_fmt(r['full_precision_bits'])])
        outStream.write(str(pTable) + '\n')
    else:
        write_json(outStream, { 'format_version': gFormatVersion
                , 'd': d, 's': s, 'p': p, 'n': n, 'seed': seed, 'modes': rows })
    return 0

def bounds_action(outStream, s, d, b, levels=None, p=None, format_='json'):
    if levels is not None:
        levels = LevelSequence(levels)
    elif p is not None:
        levels = levels_exponential(p, s)
    report = bound_report(s, d, b, levels=levels, strict=False).to_dict()
    if 'ascii' == format_:
        pTable = prettytable.PrettyTable()
        pTable.field_names = ['Quantity', 'Value']
        pTable.align['Quantity'] = 'r'
        pTable.align['Value'] = 'l'
        for k, v in sorted(report.items()):
            pTable.add_row([k, 'N/A' if v is None else v])
        outStream.write(str(pTable) + '\n')
    else:
        report['format_version'] = gFormatVersion
        write_json(outStream, report)
    return 0

def bounds_sweep_action(outStream, sValues, dValues, pValues, b):
    write_csv(outStream, gSweepColumns, bound_sweep(sValues, dValues, pValues, b)
            , metadata={'format_version': gFormatVersion, 'b': b})
    return 0

def optimal_p_action(outStream, sValues, dValues):
    rows = []
    for s in sValues:
        for d in dValues:
            pStar, eps = optimal_p(s, d)
            rows.append([s, d, pStar, eps])
    write_csv(outStream, ('s', 'd', 'p_star', 'eps_qp'), rows
            , metadata={'format_version': gFormatVersion})
    return 0

def variance_action(outStream, d, count, sValues, schemes, n, seed, p=.5):
    write_csv(outStream, gCorpusColumns, variance_corpus(d, count, sValues, schemes, n, seed, p)
            , metadata={'format_version': gFormatVersion, 'd': d, 'n': n, 'seed': seed, 'p': p})
    return 0

def separate_action(outStream, s=None, d=None, K1=None, K2=None):
    if None in (s, d, K1, K2):
        if any(x is not None for x in (s, d, K1, K2)):
            raise UsageError('Either all of --s, --d, --K1, --K2 or none must be given')
        inputs = find_separation_inputs()
    else:
        inputs = SeparationInputs(d, s, K1, K2)
    report = separation_report(inputs)
    report['format_version'] = gFormatVersion
    write_json(outStream, report)
    return 0

def simulate(outStream, problemName, d, cfgKwargs, runner, metadataPath=None):
    L = logging.getLogger(__name__)
    problem = instantiate_problem(problemName, d=d, seed=cfgKwargs['seed'])
    if 'auto' == cfgKwargs['alpha']:
        cfgKwargs['alpha'] = 1./problem.beta
        L.info(f'Learning rate set to 1/beta = {cfgKwargs["alpha"]:.6g}')
    elif isinstance(cfgKwargs['alpha'], dict) and 'auto' == cfgKwargs['alpha']['alpha']:
        cfgKwargs['alpha']['alpha'] = 1./problem.beta
    cfg = SimConfig(**cfgKwargs)
    trace = gRunners[runner](problem, cfg)
    trace.write_csv(outStream)
    if metadataPath:
        with open(metadataPath, 'w') as f:
            trace.write_metadata(f)
    return 0

#                                                                  ___________
# _______________________________________________________________/ Entry point

gQuantizeCmdAliases=('quantize', 'q')  # first is canonic
gCodecBenchCmdAliases=('codec-bench', 'bench')
gBoundsCmdAliases=('bounds', 'b')
gOptimalPCmdAliases=('optimal-p', 'opt-p')
gVarianceCmdAliases=('variance', 'var')
gSeparateCmdAliases=('separate', 'sep')
gSimulateCmdAliases=('simulate', 'sim', 'run')

class ArgumentParser(argparse.ArgumentParser):
    """Raises ``UsageError`` instead of exiting on bad arguments."""
    def error(self, message):
        raise UsageError(f'{self.prog}: {message}')

def _int_list(item):
    try:
        return [int(x) for x in item.split(',')]
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected comma-separated integers, got "{item}"')

def _float_list(item):
    try:
        return [float(x) for x in item.split(',')]
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected comma-separated numbers, got "{item}"')

def _levels_arg(item):
    """"p,s" pair of exponential levels"""
    try:
        p, s = item.split(',')
        p, s = float(p), int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected "p,s", got "{item}"')
    if not 0 < p < 1:
        raise argparse.ArgumentTypeError(f'p must be within (0, 1), got {p}')
    if s < 1:
        raise argparse.ArgumentTypeError(f's must be >= 1, got {s}')
    return p, s

def _alpha_arg(item):
    if 'auto' == item:
        return item
    try:
        alpha = float(item)
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected number or "auto", got "{item}"')
    if not (math.isfinite(alpha) and alpha > 0):
        raise argparse.ArgumentTypeError(f'learning rate must be > 0, got {item}')
    return alpha

def _default_settings_path():
    path = os.getenv('NUQKIT_SETTINGS', None)
    if path is None and os.path.isfile('./nuqkit-settings.json'):
        path = './nuqkit-settings.json'
    return path

def _build_parser():
    p = ArgumentParser(prog='nuqkit')
    # common options
    p.add_argument('-c', '--settings', help='Settings file overriding numerical'
            ' defaults', default=_default_settings_path())
    p.add_argument('-D', '--define', help='Define common string formatting'
            ' definition.', action='append')
    # sub-parsers (subcommands)
    subparsers = p.add_subparsers(help='Action options', dest='mode')
    subparsers.required = True

    quantizeP = subparsers.add_parser(gQuantizeCmdAliases[0], help='Quantize and encode'
            ' a vector', aliases=gQuantizeCmdAliases[1:])
    quantizeP.add_argument('--input', required=True, help='Vector file (one decimal per line)'
            ' or generator spec gaussian:<d>, sparse:<d>:<k>')
    quantizeP.add_argument('--scheme', choices=tuple(gSchemes), default='nuq'
            , help='Quantization scheme')
    quantizeP.add_argument('--levels', type=_levels_arg, default=(.5, 4), help='Exponential'
            ' levels "p,s" (p ignored by uniform schemes)')
    quantizeP.add_argument('--explicit-levels', type=_float_list, default=None, help='Explicit'
            ' comma-separated level sequence overriding --levels')
    quantizeP.add_argument('--bucket', type=int, default=None, help='Bucket size (default'
            ' from settings)')
    quantizeP.add_argument('--seed', type=int, required=True, help='Seed of random streams')
    quantizeP.add_argument('--float-bits', type=int, choices=(32, 64), default=None
            , help='Width of the norm field (default from settings)')
    quantizeP.add_argument('--level-code-mode', choices=gLevelCodeModes[:2], default=None
            , help='Level code of encoded stream (default from settings)')
    quantizeP.add_argument('--stream-out', help='Persist encoded stream to file')

    benchP = subparsers.add_parser(gCodecBenchCmdAliases[0], help='Measure encoded sizes'
            ' of random quantized gradients', aliases=gCodecBenchCmdAliases[1:])
    benchP.add_argument('--d', type=int, default=1024, help='Dimension of random gradients')
    benchP.add_argument('--s', type=int, default=2, help='Number of internal levels')
    benchP.add_argument('--p', type=float, default=.5, help='Exponential level base')
    benchP.add_argument('--b', type=int, choices=(32, 64), default=32
            , help='Width of the norm field')
    benchP.add_argument('--n', type=int, default=1000, help='Number of gradients')
    benchP.add_argument('--seed', type=int, required=True, help='Seed of random streams')
    benchP.add_argument('--modes', default=','.join(gLevelCodeModes)
            , type=lambda item: item.split(','), help='Level code modes to bench')
    benchP.add_argument('--format', choices=('json', 'ascii'), default='json', dest='format_'
            , help='Output format')

    boundsP = subparsers.add_parser(gBoundsCmdAliases[0], help='Evaluate variance and code'
            ' length bounds', aliases=gBoundsCmdAliases[1:])
    boundsP.add_argument('--s', type=int, help='Number of internal levels')
    boundsP.add_argument('--d', type=int, help='Dimension')
    boundsP.add_argument('--b', type=int, default=32, help='Width of the norm field')
    boundsP.add_argument('--p', type=float, default=None, help='Evaluate worst-case programs'
            ' for exponential levels of this p')
    boundsP.add_argument('--levels', type=_float_list, default=None, help='Evaluate worst-case'
            ' programs for explicit level sequence')
    boundsP.add_argument('--sweep', action='store_true', help='CSV sweep over --s-values,'
            ' --d-values, --p-values')
    boundsP.add_argument('--s-values', type=_int_list, default=[1, 2, 3, 4]
            , help='Comma-separated s values of the sweep')
    boundsP.add_argument('--d-values', type=_int_list, default=[2**k for k in range(8, 21, 2)]
            , help='Comma-separated d values of the sweep')
    boundsP.add_argument('--p-values', type=_float_list, default=[.5]
            , help='Comma-separated p values of the sweep')
    boundsP.add_argument('--format', choices=('json', 'ascii'), default='json', dest='format_'
            , help='Output format')

    optP = subparsers.add_parser(gOptimalPCmdAliases[0], help='Optimal exponential level'
            ' base minimizing worst-case variance', aliases=gOptimalPCmdAliases[1:])
    optP.add_argument('--s', type=_int_list, required=True
            , help='Comma-separated numbers of internal levels')
    optP.add_argument('--d', type=_int_list, required=True, help='Comma-separated dimensions')

    varP = subparsers.add_parser(gVarianceCmdAliases[0], help='Closed-form vs Monte Carlo'
            ' variance over random corpus', aliases=gVarianceCmdAliases[1:])
    varP.add_argument('--d', type=int, default=64, help='Dimension of corpus vectors')
    varP.add_argument('--count', type=int, default=10, help='Vectors per corpus kind')
    varP.add_argument('--s-values', type=_int_list, default=[1, 2, 3, 4]
            , help='Comma-separated numbers of internal levels')
    varP.add_argument('--schemes', type=lambda item: item.split(','), default=list(gSchemes)
            , help='Comma-separated quantization schemes')
    varP.add_argument('--p', type=float, default=.5, help='Exponential level base')
    varP.add_argument('--n', type=int, default=10000
            , help='Number of Monte Carlo draws per vector')
    varP.add_argument('--seed', type=int, required=True, help='Seed of corpus and draws')

    sepP = subparsers.add_parser(gSeparateCmdAliases[0], help='Vector on which nonuniform'
            ' levels beat max-norm uniform ones', aliases=gSeparateCmdAliases[1:])
    sepP.add_argument('--s', type=int, help='Number of internal levels (searched if omitted)')
    sepP.add_argument('--d', type=int, help='Dimension')
    sepP.add_argument('--K1', type=float, help='First separation constant')
    sepP.add_argument('--K2', type=float, help='Second separation constant')

    simP = subparsers.add_parser(gSimulateCmdAliases[0], help='Run simulated distributed SGD'
            , aliases=gSimulateCmdAliases[1:])
    simP.add_argument('--problem', choices=('least_squares', 'logistic', 'smooth_nonconvex')
            , default='least_squares', help='Built-in problem to optimize')
    simP.add_argument('--d', type=int, default=64, help='Problem dimension')
    simP.add_argument('--scheme', choices=gSimSchemes, default='full_precision'
            , help='Gradient compression scheme')
    simP.add_argument('--s', type=int, default=4, help='Number of internal levels')
    simP.add_argument('--p', type=float, default=.5, help='Exponential level base')
    simP.add_argument('--bucket', type=int, default=None
            , help='Bucket size (default from settings)')
    simP.add_argument('--level-code-mode', choices=gLevelCodeModes, default=None
            , help='Level code of messages (default from settings)')
    simP.add_argument('--K', type=int, default=1, help='Number of workers')
    simP.add_argument('--T', type=int, default=100, help='Number of iterations')
    simP.add_argument('--alpha', type=_alpha_arg, default='auto', help='Learning rate or'
            ' "auto" for 1/beta')
    simP.add_argument('--schedule', choices=('constant', 'inverse-sqrt'), default='constant'
            , help='Learning rate schedule')
    simP.add_argument('--batch', type=int, default=0, help='Oracle mini-batch size (0 for'
            ' full batch)')
    simP.add_argument('--seed', type=int, required=True
            , help='Seed of oracle, quantization and delay streams')
    simP.add_argument('--momentum', type=float, default=None
            , help='Momentum run with this momentum factor')
    simP.add_argument('--mode', type=int, choices=(0, 1), default=0, dest='momentumMode'
            , help='0 for heavy-ball, 1 for Nesterov')
    simP.add_argument('--async', type=int, default=None, dest='asyncDelay'
            , help='Asynchronous run with this delay bound')
    simP.add_argument('--topology', choices=('ring', 'complete', 'star'), default=None
            , help='Decentralized (ECD-PSGD) run over this topology')

    for sp in (quantizeP, benchP, boundsP, optP, varP, sepP, simP):
        sp.add_argument('-o', '--output', default=None, help='Output file (stdout by default)')
    return p

def _dispatch(args, outStream):
    L = logging.getLogger(__name__)
    if args.mode in gQuantizeCmdAliases:  # QUANTIZE
        p, s = args.levels
        return quantize_action(outStream, args.input, args.scheme, p, s, args.explicit_levels
                , args.bucket, args.seed
                , floatBits=args.float_bits
                , levelCodeMode=args.level_code_mode
                , streamOut=args.stream_out)
    elif args.mode in gCodecBenchCmdAliases:  # CODEC-BENCH
        return codec_bench(outStream, args.d, args.s, args.n, args.seed, args.modes
                , p=args.p, b=args.b, format_=args.format_)
    elif args.mode in gBoundsCmdAliases:  # BOUNDS
        if args.sweep:
            return bounds_sweep_action(outStream, args.s_values, args.d_values, args.p_values, args.b)
        if args.s is None or args.d is None:
            raise UsageError('--s and --d are required unless --sweep is given')
        return bounds_action(outStream, args.s, args.d, args.b, levels=args.levels, p=args.p
                , format_=args.format_)
    elif args.mode in gOptimalPCmdAliases:  # OPTIMAL-P
        return optimal_p_action(outStream, args.s, args.d)
    elif args.mode in gVarianceCmdAliases:  # VARIANCE
        return variance_action(outStream, args.d, args.count, args.s_values, args.schemes
                , args.n, args.seed, p=args.p)
    elif args.mode in gSeparateCmdAliases:  # SEPARATE
        return separate_action(outStream, args.s, args.d, args.K1, args.K2)
    elif args.mode in gSimulateCmdAliases:  # SIMULATE
        alpha = args.alpha
        if 'constant' != args.schedule:
            alpha = {'type': args.schedule, 'alpha': alpha}
        cfgKwargs = { 'K': args.K, 'T': args.T, 'alpha': alpha
                    , 'scheme': args.scheme, 's': args.s, 'p': args.p
                    , 'bucketSize': args.bucket
                    , 'levelCodeMode': args.level_code_mode
                    , 'seed': args.seed, 'batch': args.batch
                    , 'momentum': args.momentum or 0., 'mode': args.momentumMode
                    , 'asyncDelay': args.asyncDelay or 0
                    , 'topology': args.topology
                    }
        selected = [ (name, flag) for name, flag, value in ( ('ecd_psgd', '--topology', args.topology)
                                                           , ('async', '--async', args.asyncDelay)
                                                           , ('momentum', '--momentum', args.momentum) )
                     if value is not None ]
        if len(selected) > 1:
            raise UsageError('Options ' + ', '.join(flag for _, flag in selected)
                    + ' select different runs and can not be combined')
        runner = selected[0][0] if selected else 'data_parallel'
        metadataPath = args.output + gSettings['metadata-suffix'] if args.output else None
        return simulate(outStream, args.problem, args.d, cfgKwargs, runner, metadataPath)
    L.critical(f'Error: unknown sub-command: "{args.mode}".')
    return 1

def nuqkit_run_from_cmd_args(argv):
    """
    Runs command given by ``argv`` (program name first) and returns exit
    code: 0 on success, 1 on usage error, 2 on numerical failure, 3 on
    violated precondition.
    """
    L = logging.getLogger(__name__)
    p = _build_parser()
    mode = None
    try:
        args = p.parse_args(argv[1:])
        mode = args.mode
        if args.settings:
            read_settings_file(args.settings, definitions=args.define)
        if args.output:
            with open(args.output, 'w') as f:
                return _dispatch(args, f)
        return _dispatch(args, sys.stdout)
    except Exception as e:
        if logging.DEBUG >= logging.root.level:
            L.critical(f'Error occurred during execution of {mode}:')
            traceback.print_exc()
        else:
            L.critical(f'Exit due to an error: {str(e)}')
        return e.exitCode if isinstance(e, NuqkitError) else 2


# Logging config for "app mode" (when running as a script,
# configured from main()); log goes to stderr, payload to stdout
gColoredPrfxs = {
        logging.CRITICAL : "\033[1;41;33m▒E\033[0m",
        logging.ERROR    : "\033[2;41;32m░e\033[0m",
        logging.WARNING  : "\033[1;43;31m░w\033[0m",
        logging.INFO     : "\033[1;44;37m░i\033[0m",
        logging.DEBUG    : "\033[2;40;36m░D\033[0m",
        logging.NOTSET   : "\033[31;2;11m░?\033[0m"
    }

class ConsoleColoredFormatter(logging.Formatter):
    def format( self, record ):
        m = super(ConsoleColoredFormatter, self).format(record)
        m = gColoredPrfxs[record.levelno] + ' ' + m
        return m

gLoggingConfig = {
    'version': 1,
    'disable_existing_loggers': True,
    'formatters': {
        'standard': {
            '()': ConsoleColoredFormatter,
            'format': "\033[3m%(asctime)s\033[0m %(message)s",
            'datefmt': "%H:%M:%S"
        }
    },
    'handlers': {
        'default': {
            'level': 'NOTSET',
            'formatter': 'standard',
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
        },
    },
    'loggers': {
        '': {  # root logger
            'handlers': ['default'],
            'level': 'NOTSET',
            'propagate': False
        },
    }
}

def main():
    import logging.config
    loglevel = os.getenv('LOGLEVEL', 'INFO')
    gLoggingConfig['handlers']['default']['level'] = loglevel
    gLoggingConfig['loggers']['']['level'] = loglevel
    logging.config.dictConfig(gLoggingConfig)
    sys.exit(nuqkit_run_from_cmd_args(sys.argv))

if "__main__" == __name__:
    main()
