# **************************************************************************
# *
# * This program is free software; you can redistribute it and/or modify
# * it under the terms of the GNU General Public License as published by
# * the Free Software Foundation; either version 3 of the License, or
# * (at your option) any later version.
# *
# * This program is distributed in the hope that it will be useful,
# * but WITHOUT ANY WARRANTY; without even the implied warranty of
# * MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# * GNU General Public License for more details.
# *
# **************************************************************************

# ----------------- Constants values ------------------------------------------

PPRLVGAN_DEVICE = 'PPRLVGAN_DEVICE'
PPRLVGAN_THREADS = 'PPRLVGAN_THREADS'
PPRLVGAN_LONG_TESTS = 'PPRLVGAN_LONG_TESTS'

# Cardinal expressions, label order used by toyfaces and folder import
EXPRESSIONS = ['anger', 'disgust', 'fear', 'joy', 'neutral', 'sadness',
               'surprise']
N_EXPRESSIONS = len(EXPRESSIONS)

# Split tags
SPLIT_TRAIN = 'train'
SPLIT_TEST = 'test'
SPLITS = [SPLIT_TRAIN, SPLIT_TEST]

# Manifest columns, in file order
MANIFEST_COLUMNS = ['file', 'identity', 'expression', 'split']

# Probability clamp used before every log
LOG_EPS = 1e-7

CHECKPOINT_VERSION = 1

# File names
MANIFEST_FILE = 'manifest.csv'
IMAGES_DIR = 'images'
CONFIG_TABLE = 'config'
MANIFEST_TABLE = 'manifest'
ARCH_TABLE = 'arch'
EPOCHS_TABLE = 'epochs'
MODEL_FILE = 'model.pt'
CHECKPOINTS_DIR = 'checkpoints'
PREVIEWS_DIR = 'previews'
METRICS_FILE = 'metrics.jsonl'
EPOCHS_FILE = 'epochs.star'
LOSSES_PLOT = 'losses.png'
RUN_FILE = 'run.json'
CONFIG_FILE = 'config.star'
REPORT_FILE = 'report_%s.json'
CCR_TABLE_FILE = 'ccr_table.csv'

# Attack scenarios
SCENARIO_UNCONSTRAINED = 'unconstrained'
SCENARIO_RANDOM = 'random_baseline'
SCENARIO_1 = 'I'
SCENARIO_2 = 'II'
SCENARIO_3 = 'III'
SCENARIOS = [SCENARIO_UNCONSTRAINED, SCENARIO_RANDOM,
             SCENARIO_1, SCENARIO_2, SCENARIO_3]

# Names accepted on the command line for each scenario
SCENARIO_ALIASES = {
    '1': SCENARIO_1, 'i': SCENARIO_1,
    '2': SCENARIO_2, 'ii': SCENARIO_2,
    '3': SCENARIO_3, 'iii': SCENARIO_3,
    'unconstrained': SCENARIO_UNCONSTRAINED,
    'random': SCENARIO_RANDOM, 'random_baseline': SCENARIO_RANDOM,
}

CCR_TABLE_COLUMNS = ['scenario', 'id_ccr', 'expr_ccr', 'n_train', 'n_test']

# Attacker architecture ids
ATTACKER_CONV = 'conv-d2d3'
ATTACKER_ANN = 'ann'
ATTACKER_NONE = 'none'

# Synthesis modes
SYNTH_REPLACE = 'replace'
SYNTH_PRIOR = 'prior'
SYNTH_MORPH = 'morph'
SYNTH_COMPLETE = 'complete'
SYNTH_MODES = [SYNTH_REPLACE, SYNTH_PRIOR, SYNTH_MORPH, SYNTH_COMPLETE]

# Named completion masks, rectangles in normalized template coordinates:
# (rowStart, rowEnd, colStart, colEnd)
MASK_UPPER_FACE = 'upper_face'
MASK_MOUTH = 'mouth'
MASK_REGIONS = {
    MASK_UPPER_FACE: (0.375, 0.5625, 0.3125, 0.6875),
    MASK_MOUTH: (0.6875, 0.875, 0.3125, 0.6875),
}
MASK_COVERAGE_RANGE = (0.04, 0.12)

# Preset for the full-size architecture (64 px)
PRESET_FULL_SCALE = {
    'imageSize': 64,
    'baseChannels': 32,
    'latentDim': 128,
    'batchSize': 256,
}

# D1 mean probabilities outside this band are reported as collapse
D1_HEALTHY_BAND = (0.3, 0.7)
KL_EXPLOSION_FACTOR = 10.0

# CLI exit codes
EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_STORAGE = 2
EXIT_DIVERGENCE = 3
EXIT_CHECKPOINT = 4
EXIT_SYNTH_ARGS = 5
