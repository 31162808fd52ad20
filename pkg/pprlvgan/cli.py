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
"""
Command line entry point with one subcommand per pipeline stage:

    pprlvgan data   --out data/ [--import faces/] [--left-out 2,5]
    pprlvgan train  --manifest data/manifest.csv --out run/ [--epochs 30]
    pprlvgan attack --checkpoint run/model.pt --manifest data/manifest.csv
                    --out attack/ [--scenarios 1,2,3,unconstrained,random]
    pprlvgan synth  replace|prior|morph|complete --checkpoint run/model.pt
                    --out synth/ [mode options]

Every ExperimentConfig key can be given as --<key>; values from --config
files are overridden by flags. Exit codes: 0 ok, 1 invalid input,
2 I/O error, 3 training divergence, 4 checkpoint mismatch,
5 invalid synthesis arguments.
"""

import os
import sys
import json
import logging
import argparse

import pyworkflow.utils as pwutils

from . import __version__, Plugin
from .constants import *
from .exceptions import (PprlVganError, ValidationError, CheckpointError,
                         SynthArgumentError, StorageError)
from .objects import ExperimentConfig, MaskSpec
from .convert import (DatasetManifest, writeConfig, readConfigValues,
                      loadCheckpoint, readImage, imageToTensor, writeImage,
                      fileDigest)
from .toyfaces import generateToyfaces
from .dataset import splitDataset, importImageFolder, loadImages
from . import train as trainModule
from . import attack
from . import synth
from .viewers import writeGrid

logger = logging.getLogger(__name__)

# Short flags accepted besides --<key>
FLAG_ALIASES = {
    'gStepsPerDStep': ['--g-per-d'],
    'leftOut': ['--left-out'],
}

PRESETS = {'full': PRESET_FULL_SCALE}


class ArgumentParser(argparse.ArgumentParser):
    """ Report usage errors as ValidationError instead of exiting. """
    def error(self, message):
        raise ValidationError("%s: %s" % (self.prog, message))


# ----------------- Configuration --------------------------------------------

def resolveConfig(configFile=None, preset=None, overrides=None):
    """ Build the ExperimentConfig of a command.
    Defaults are replaced by the config file values, then by the preset
    and finally by the explicit flag values (overrides).
    """
    values = readConfigValues(configFile) if configFile else {}
    if preset:
        if preset not in PRESETS:
            raise ValidationError("Unknown preset '%s', use one of: %s"
                                  % (preset, ', '.join(PRESETS)))
        values.update(PRESETS[preset])
    values.update(overrides or {})
    return ExperimentConfig.fromDict(values)


def writeRunInfo(outDir, command, config, inputs=None, outputs=None):
    """ Write run.json (and the resolved config.star) into outDir. """
    info = {
        'command': command,
        'version': __version__,
        'seed': config.seed,
        'config': config.toStrDict(),
        'inputs': inputs or {},
        'outputs': outputs or {},
    }
    path = os.path.join(outDir, RUN_FILE)
    try:
        pwutils.makePath(outDir)
        with open(path, 'w') as f:
            json.dump(info, f, indent=2, sort_keys=True)
            f.write('\n')
    except OSError as e:
        raise StorageError("Could not write %s: %s" % (path, e))
    writeConfig(os.path.join(outDir, CONFIG_FILE), config)
    return path


def _printHeader(msg):
    print(pwutils.magentaStr("\n==> %s" % msg))


# ----------------- Commands -------------------------------------------------

def cmdData(config, outDir, importDir=None):
    """ Generate (or import) a dataset and split it per cell.
    The left-out cell of the config is recorded in the manifest.
    Return the manifest path.
    """
    config.validate()
    if importDir:
        _printHeader("Importing images from %s" % importDir)
        manifest = importImageFolder(importDir, outDir, config.imageSize,
                                     seed=config.seed)
    else:
        _printHeader("Generating toyfaces in %s" % outDir)
        manifest = generateToyfaces(config.getToyfacesSpec(), outDir)

    manifest = splitDataset(manifest, config.trainFraction, config.seed)
    manifest = manifest.clone(leftOut=config.leftOut)
    manifestPath = manifest.write(os.path.join(outDir, MANIFEST_FILE))
    print(manifest.toString())
    print(pwutils.greenStr("Manifest written to %s" % manifestPath))
    writeRunInfo(outDir, 'data', config,
                 inputs={'import': importDir},
                 outputs={'manifest': MANIFEST_FILE,
                          'manifestDigest': fileDigest(manifestPath)})
    return manifestPath


def cmdTrain(config, manifestPath, outDir, resumeFrom=None,
             leftOutGiven=False):
    """ Train on a split manifest and write model.pt, metrics.jsonl,
    epochs.star and losses.png into outDir. Return the checkpoint path.
    Params:
        leftOutGiven: if False, the left-out cell recorded in the manifest
            is used instead of the config one.
    """
    manifest = DatasetManifest.read(manifestPath)
    if not leftOutGiven and manifest.leftOut is not None:
        config = config.update(leftOut=manifest.leftOut)
    arch = config.getArchConfig(nIdentities=manifest.nIdentities,
                                nExpressions=manifest.nExpressions,
                                imageSize=manifest.imageSize)
    trainConfig = config.getTrainConfig()
    device = Plugin.setupTorch()
    pwutils.makePath(outDir)
    writeRunInfo(outDir, 'train', config,
                 inputs={'manifest': os.path.abspath(manifestPath),
                         'manifestDigest': fileDigest(manifestPath),
                         'resume': resumeFrom},
                 outputs={'checkpoint': MODEL_FILE, 'metrics': METRICS_FILE})

    _printHeader("Training %d epochs on %s (%s)"
                 % (trainConfig.epochs, manifestPath, device))
    model, records = trainModule.train(manifest, arch, trainConfig,
                                       outDir=outDir, resumeFrom=resumeFrom,
                                       device=device)
    counters = model.getCounters()
    print(pwutils.greenStr("Done: %(epoch)d epochs, %(dSteps)d D updates, "
                           "%(gSteps)d G updates" % counters))
    return os.path.join(outDir, MODEL_FILE)


def parseScenarios(value):
    """ Scenario names from a comma separated list, in canonical order. """
    if isinstance(value, str):
        value = [v for v in value.split(',') if v.strip()]
    selected = set()
    for v in value:
        key = v.strip().lower()
        if key == 'all':
            selected.update(SCENARIOS)
        elif key in SCENARIO_ALIASES:
            selected.add(SCENARIO_ALIASES[key])
        else:
            raise ValidationError("Unknown scenario '%s'" % v)
    if not selected:
        raise ValidationError("No attack scenario selected")
    return [s for s in SCENARIOS if s in selected]


def checkModelManifest(model, manifest):
    """ The checkpoint must match the dataset dimensions. """
    arch = model.arch
    pairs = [('nIdentities', arch.nIdentities, manifest.nIdentities),
             ('nExpressions', arch.nExpressions, manifest.nExpressions)]
    if manifest.imageSize:
        pairs.append(('imageSize', arch.imageSize, manifest.imageSize))
    diff = ['%s: %s != %s' % p for p in pairs if p[1] != p[2]]
    if diff:
        raise CheckpointError("Checkpoint %s does not match the manifest "
                              "(%s)" % (model.checkpointPath, ', '.join(diff)))


def cmdAttack(config, checkpointPath, manifestPath, scenarios, outDir,
              allowUntrained=False):
    """ Run the selected scenarios and baselines, write one
    report_<scenario>.json each and ccr_table.csv. Return report paths.
    """
    scenarios = parseScenarios(scenarios)
    manifest = DatasetManifest.read(manifestPath)
    device = Plugin.setupTorch()
    model = loadCheckpoint(checkpointPath).to(device)
    checkModelManifest(model, manifest)
    attackConfig = config.getAttackConfig()
    seed = config.seed

    _printHeader("Attacking %s (%s)" % (checkpointPath,
                                        ', '.join(scenarios)))
    trainData = testData = None
    if any(s != SCENARIO_RANDOM for s in scenarios):
        trainData = loadImages(manifest, SPLIT_TRAIN)
        testData = loadImages(manifest, SPLIT_TEST)
    classifiers = None
    if SCENARIO_UNCONSTRAINED in scenarios or SCENARIO_1 in scenarios:
        classifiers = attack.trainEvaluationClassifiers(
            model.arch, trainData, attackConfig, seed)

    kwargs = dict(config=attackConfig, trainData=trainData,
                  testData=testData)
    reports = []
    for s in scenarios:
        if s == SCENARIO_RANDOM:
            report = attack.randomBaseline(manifest, seed)
        elif s == SCENARIO_UNCONSTRAINED:
            report = attack.runUnconstrainedBaseline(
                manifest, seed, model.arch, classifiers=classifiers, **kwargs)
        elif s == SCENARIO_1:
            report = attack.runScenario1(
                model, manifest, seed, classifiers=classifiers,
                allowUntrained=allowUntrained, **kwargs)
        elif s == SCENARIO_2:
            report = attack.runScenario2(model, manifest, seed,
                                         allowUntrained=allowUntrained,
                                         **kwargs)
        else:
            report = attack.runScenario3(model, manifest, seed,
                                         allowUntrained=allowUntrained,
                                         **kwargs)
        reports.append(report)

    pwutils.makePath(outDir)
    paths = [attack.writeReport(r, os.path.join(
        outDir, REPORT_FILE % r.scenario.get())) for r in reports]
    attack.writeCcrTable(reports, os.path.join(outDir, CCR_TABLE_FILE))
    for r in reports:
        print(pwutils.greenStr(str(r)))
    writeRunInfo(outDir, 'attack', config,
                 inputs={'checkpoint': os.path.abspath(checkpointPath),
                         'manifest': os.path.abspath(manifestPath),
                         'scenarios': scenarios},
                 outputs={'reports': [os.path.basename(p) for p in paths],
                          'table': CCR_TABLE_FILE})
    return paths


def _requireInput(mode, path, flag='--input'):
    if not path:
        raise SynthArgumentError("Mode '%s' needs %s" % (mode, flag))
    if not os.path.exists(path):
        raise StorageError("Input image not found: %s" % path)
    return path


def _requireIdentity(mode, identity, nIdentities):
    if identity is None:
        raise SynthArgumentError("Mode '%s' needs --identity" % mode)
    if not 0 <= int(identity) < nIdentities:
        raise SynthArgumentError("Identity %s out of range [0, %d)"
                                 % (identity, nIdentities))
    return int(identity)


def cmdSynth(config, checkpointPath, mode, outDir, input=None, input2=None,
             identity=None, steps=8, mask=MASK_UPPER_FACE, samples=1):
    """ Synthesize images with a trained model. Return the written paths.
    Modes:
        replace: --input, one output per identity plus an input + N_id grid.
        prior: --samples rows of prior samples, one column per identity
            (or only --identity).
        morph: --input, --input2, --identity and --steps; the strip shows
            the two sources at its ends.
        complete: --input, --identity (of the query subject) and --mask;
            the grid shows original, masked and completed images.
    """
    if mode not in SYNTH_MODES:
        raise SynthArgumentError("Unknown synthesis mode '%s', use one of: "
                                 "%s" % (mode, ', '.join(SYNTH_MODES)))
    Plugin.setupTorch()
    model = loadCheckpoint(checkpointPath)
    arch = model.arch
    nIds = arch.nIdentities
    size = arch.imageSize
    pwutils.makePath(outDir)

    def _read(path):
        return imageToTensor(readImage(path, size))

    def _out(name):
        return os.path.join(outDir, name)

    paths = []
    _printHeader("Synthesis '%s' with %s" % (mode, checkpointPath))

    if mode == SYNTH_REPLACE:
        image = _read(_requireInput(mode, input))
        outputs = synth.replaceIdentityAll(model, image)
        for i, img in enumerate(outputs):
            paths.append(writeImage(_out('replace_id%02d.png' % i), img))
        paths.append(writeGrid(_out('replace_grid.png'), [[image] + outputs]))

    elif mode == SYNTH_PRIOR:
        if int(samples) < 1:
            raise SynthArgumentError("--samples must be at least 1")
        codes = range(nIds) if identity is None \
            else [_requireIdentity(mode, identity, nIds)]
        rows = []
        for k in range(int(samples)):
            row = []
            for i in codes:
                img = synth.sampleFromPrior(model, i, config.seed + k)
                paths.append(writeImage(_out('prior_s%02d_id%02d.png'
                                             % (k, i)), img))
                row.append(img)
            rows.append(row)
        paths.append(writeGrid(_out('prior_grid.png'), rows))

    elif mode == SYNTH_MORPH:
        image1 = _read(_requireInput(mode, input))
        image2 = _read(_requireInput(mode, input2, '--input2'))
        code = _requireIdentity(mode, identity, nIds)
        frames = synth.morph(model, image1, image2, code, steps)
        for k, img in enumerate(frames):
            paths.append(writeImage(_out('morph_%02d.png' % k), img))
        # steps cells, the sources replace the alpha = 0 and 1 frames
        paths.append(writeGrid(_out('morph_strip.png'),
                               [[image1] + frames[1:-1] + [image2]]))

    else:
        if mask not in MASK_REGIONS:
            raise SynthArgumentError("Unknown mask '%s', use one of: %s"
                                     % (mask, ', '.join(MASK_REGIONS)))
        image = _read(_requireInput(mode, input))
        code = _requireIdentity(mode, identity, nIds)
        maskSpec = MaskSpec(region=mask)
        query = synth.maskImage(image, maskSpec)
        completed = synth.complete(model, query, maskSpec, code)
        paths.append(writeImage(_out('complete_query.png'), query))
        paths.append(writeImage(_out('complete_result.png'), completed))
        paths.append(writeGrid(_out('complete_grid.png'),
                               [[image, query, completed]]))

    writeRunInfo(outDir, 'synth', config,
                 inputs={'checkpoint': os.path.abspath(checkpointPath),
                         'mode': mode, 'input': input, 'input2': input2,
                         'identity': identity, 'steps': steps,
                         'mask': mask, 'samples': samples},
                 outputs={'images': [os.path.basename(p) for p in paths]})
    print(pwutils.greenStr("%d images written to %s" % (len(paths), outDir)))
    return paths


# ----------------- Argument parsing -----------------------------------------

def _addConfigArgs(parser):
    group = parser.add_argument_group('configuration')
    group.add_argument('--config', help="STAR config file (data_config "
                                        "block) with key-value pairs.")
    group.add_argument('--preset', help="Named set of values: %s."
                                        % ', '.join(PRESETS))
    group.add_argument('--verbose', '-v', action='store_true',
                       help="Log debug messages.")
    defaults = ExperimentConfig().toStrDict()
    for key in ExperimentConfig.fieldNames():
        group.add_argument('--%s' % key, *FLAG_ALIASES.get(key, []),
                           dest=key, default=None, metavar='VALUE',
                           help="(default: %s)" % defaults[key])


def createParser():
    parser = ArgumentParser(prog='pprlvgan', description=__doc__,
                            formatter_class=argparse.RawTextHelpFormatter)
    parser.add_argument('--version', action='version',
                        version='%(prog)s ' + __version__)
    commands = parser.add_subparsers(dest='command', metavar='command')

    p = commands.add_parser('data', help="Generate or import a dataset.")
    p.add_argument('--out', required=True, help="Output folder.")
    p.add_argument('--import', dest='importDir',
                   help="Folder tree <identity>/<expression>/<images>.")
    _addConfigArgs(p)

    p = commands.add_parser('train', help="Train the networks.")
    p.add_argument('--manifest', required=True)
    p.add_argument('--out', required=True)
    p.add_argument('--resume', help="Checkpoint to continue from.")
    _addConfigArgs(p)

    p = commands.add_parser('attack', help="Run privacy attacks.")
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--manifest', required=True)
    p.add_argument('--out', required=True)
    p.add_argument('--scenarios', default='1,2,3,unconstrained,random',
                   help="Comma separated: 1, 2, 3, unconstrained, random "
                        "or all.")
    p.add_argument('--allow-untrained', action='store_true',
                   help="Accept a checkpoint without generator updates.")
    _addConfigArgs(p)

    p = commands.add_parser('synth', help="Synthesize images.")
    p.add_argument('mode', help=' | '.join(SYNTH_MODES))
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--out', required=True)
    p.add_argument('--input')
    p.add_argument('--input2')
    p.add_argument('--identity', type=int)
    p.add_argument('--steps', type=int, default=8)
    p.add_argument('--mask', default=MASK_UPPER_FACE,
                   help=' | '.join(MASK_REGIONS))
    p.add_argument('--samples', type=int, default=1)
    _addConfigArgs(p)
    return parser


def _getOverrides(args):
    return {k: getattr(args, k) for k in ExperimentConfig.fieldNames()
            if getattr(args, k, None) is not None}


def setupLogging(verbose=False):
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format='%(levelname)s %(name)s: %(message)s',
                        stream=sys.stderr)


def run(args):
    overrides = _getOverrides(args)
    config = resolveConfig(args.config, args.preset, overrides)

    if args.command == 'data':
        return cmdData(config, args.out, args.importDir)
    if args.command == 'train':
        return cmdTrain(config, args.manifest, args.out,
                        resumeFrom=args.resume,
                        leftOutGiven='leftOut' in overrides)
    if args.command == 'attack':
        return cmdAttack(config, args.checkpoint, args.manifest,
                         args.scenarios, args.out,
                         allowUntrained=args.allow_untrained)
    return cmdSynth(config, args.checkpoint, args.mode, args.out,
                    input=args.input, input2=args.input2,
                    identity=args.identity, steps=args.steps,
                    mask=args.mask, samples=args.samples)


def main(argv=None):
    """ Run the command line and return the exit code. """
    try:
        args = createParser().parse_args(argv)
        if args.command is None:
            raise ValidationError("Missing command: data, train, attack "
                                  "or synth")
        setupLogging(args.verbose)
        run(args)
    except PprlVganError as e:
        print(pwutils.redStr("ERROR: %s" % e), file=sys.stderr)
        return e.EXIT_CODE
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
