import os, logging, json

from nuqkit.errors import UsageError

#
# Default numerical settings. Gets overloaded by settings .json file at entry
# point (or by `read_settings_file()` called from user code).

gSettings = {
    # Normalized magnitudes r = |v_i|/norm outside of [0, 1] by less than
    # this are clamped, otherwise rejected
    'clamp-tolerance'       : 1e-12,
    # Width of the norm field in encoded gradients (32 or 64)
    'float-bits'            : 32,
    # Default level code used by codec: "log_power_of_two", "level_index"
    # or "huffman"
    'level-code-mode'       : 'level_index',
    # Bucket size used when not specified explicitly; None means whole
    # vector is quantized as a single bucket
    'bucket-size'           : None,
    # Number of Monte Carlo draws generated from a single stream at once
    'mc-chunk-size'         : 4096,
    # Statistical checks tolerate deviations up to this number of standard
    # errors
    'stderr-tolerance'      : 5.0,
    # Worst-case variance programs: number of random restarts and iterations
    # of projected subgradient ascent for the QCQP
    'qcqp-restarts'         : 16,
    'qcqp-iterations'       : 600,
    # Relative disagreement between QCQP restarts considered as
    # non-convergence
    'qcqp-rel-tolerance'    : 0.005,
    # Dense grid cross-check of QCQP solution for s <= 2 uses pitch d/N
    'qcqp-grid-pitch'       : 200,
    # Seed of QCQP restarts
    'qcqp-seed'             : 0,
    # Optimal p search range, seeding grid size and golden-section tolerance
    'optimal-p-range'       : [0.05, 0.95],
    'optimal-p-grid'        : 19,
    'optimal-p-tolerance'   : 1e-4,
    # Code length bound mode: "nominal" (all (1+o(1)) factors are 1) or
    # "slack" (log terms multiplied by `slack-factor`)
    'bound-mode'            : 'nominal',
    'slack-factor'          : 1.0,
    # Show tqdm progress bars in long loops
    'progress'              : False,
    # Simulator keeps parameters snapshot each N iterations (0 disables)
    'snapshot-every'        : 0,
    # Suffix appended to trace output path for JSON metadata
    'metadata-suffix'       : '.meta.json',
    # Dictionary of common definitions used to format string settings
    'definitions'           : {},
}

def _expand(value):
    """Expands definitions and environment variables in string values."""
    if type(value) is str:
        return os.path.expandvars(value.format(**gSettings['definitions']))
    if type(value) is list:
        return [_expand(item) for item in value]
    return value

def read_settings_file(settingsFilePath, definitions=None):
    """
    Reads settings file (.json) overriding entries of ``gSettings``.

    Keys of the file must be known to ``gSettings``, string values are
    formatted with ``definitions`` (given in file and by ``-D`` option of
    command line). This is NOT a pure function as it changes ``gSettings``
    object.
    """
    L = logging.getLogger(__name__)
    if not definitions: definitions=[]
    if not os.path.isfile(settingsFilePath):
        raise UsageError(f"Not a file: \"{settingsFilePath}\"")
    with open(settingsFilePath) as f:
        try:
            settings = json.load(f)
        except json.JSONDecodeError as e:
            raise UsageError(f'{settingsFilePath}:{e.lineno}: {e.msg}')
    if 'definitions' not in settings.keys():
        settings['definitions'] = {}
    # append some common definitions
    if 'pwd' not in settings['definitions'].keys():
        settings['definitions']['pwd'] = os.getcwd()
    for k, v in settings['definitions'].items():
        gSettings['definitions'][k] = os.path.expandvars(v)
    for entry in definitions:
        if '=' not in entry:
            raise UsageError(f'Definition "{entry}" is not of form name=value')
        k, v = entry.split('=', 1)
        gSettings['definitions'][k] = v
    # expand definitions referring each other until nothing changes
    for _ in range(len(gSettings['definitions']) + 1):
        hadChange = False
        for k, v in gSettings['definitions'].items():
            newVal = v.format(**gSettings['definitions'])
            if newVal != v:
                hadChange = True
            gSettings['definitions'][k] = newVal
        if not hadChange: break
    else:
        raise UsageError('Definitions in settings refer to each other cyclically.')
    # modify gSettings, substituting 1st level entries
    for k, v in settings.items():
        if 'definitions' == k: continue
        if k not in gSettings:
            raise UsageError(f'{settingsFilePath}: unknown setting "{k}"')
        gSettings[k] = _expand(v)
        L.debug(f'Setting "{k}" set to {gSettings[k]!r}')
    if gSettings['float-bits'] not in (32, 64):
        raise UsageError(f'{settingsFilePath}: "float-bits" must be 32 or 64')
    return settings
