'''The gaitfusion command-line interface.

    gaitfusion run <config>        run an experiment and write every output
    gaitfusion export <config>     fit the feature extractors and write features.csv
    gaitfusion metrics <scores>    recompute metrics from a scores.csv file

The exit status is 0 on success, 2 for a configuration error, 3 for a data error and 4
for a numerical failure.'''

# Copyright 2018-2019, James Humphry
# This work is released under the ISC license - see LICENSE for details
# SPDX-License-Identifier: ISC

import argparse
import logging
import sys

from . import ConfigError, GaitFusionError
from . import config, pipeline
from .stagelog import open_stage_log

def build_parser():
    '''Return the argument parser for the command line.'''

    parser = argparse.ArgumentParser(prog='gaitfusion',
                                     description='Classify bimodal gait recordings with '
                                     'Fisher-vector, CorrMNN and HMM features')
    parser.add_argument('--log', help='Write the stage log to a file (STDOUT for stdout)',
                        action='store', default='STDOUT')
    parser.add_argument('--verbose', help='Report library diagnostics on stderr',
                        action='store_true')

    subparsers = parser.add_subparsers(dest='verb', required=True)
    for verb, help_text in (('run', 'Run an experiment'),
                            ('export', 'Fit the feature extractors and export features')):
        sub = subparsers.add_parser(verb, help=help_text)
        sub.add_argument('config', help='Experiment configuration file')
        sub.add_argument('--seed', help='Override experiment.seed', action='store',
                         type=int, default=None)
        sub.add_argument('--out-dir', help='Directory for the outputs (default: results)',
                         action='store', default='results')
        sub.add_argument('--threads', help='Worker threads for loading and HMM fitting',
                         action='store', type=int, default=1)
        sub.add_argument('--set', help='Override a configuration value, as section.key=value',
                         action='append', default=[], metavar='KEY=VALUE')

    sub = subparsers.add_parser('metrics', help='Recompute metrics from scores.csv')
    sub.add_argument('scores', help='A scores.csv file written by run')
    sub.add_argument('--out-dir', help='Directory for the outputs (default: beside the '
                     'scores file)', action='store', default=None)
    return parser

def overrides_from_args(args):
    '''Return the configuration overrides requested on the command line.'''

    overrides = dict()
    for item in args.set:
        key, separator, value = item.partition('=')
        if not separator:
            raise ConfigError('--set expects section.key=value, not \'{0}\''
                              .format(item))
        overrides[key.strip()] = value.strip()
    if args.seed is not None:
        overrides['experiment.seed'] = args.seed
    return overrides

def main(argv=None):
    '''Run the command line and return the exit status.'''

    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s')

    try:
        if args.verb == 'metrics':
            report = pipeline.metrics_from_scores(args.scores, args.out_dir)
            print('accuracy {0:.4f}'.format(report.accuracy))
            return 0

        experiment = config.load_config(args.config, overrides=overrides_from_args(args))
        if args.threads < 1:
            raise ConfigError('--threads must be at least 1')
        log = open_stage_log(args.log)
        try:
            result = pipeline.run_experiment(experiment, args.out_dir, args.threads, log,
                                             export_only=args.verb == 'export')
        finally:
            log.close()
        if result.report is not None:
            print('accuracy {0:.4f}'.format(result.report.accuracy))
        return 0

    except GaitFusionError as err:
        print('gaitfusion: {0}'.format(err), file=sys.stderr)
        return err.exit_code

if __name__ == '__main__':
    sys.exit(main())
