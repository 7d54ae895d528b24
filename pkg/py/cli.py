#!/usr/bin/python
"""
This program runs an EventWarden scenario and reports the gas and USD cost of each step
of the protocol, next to the figures measured on a public test network for reference.
The scenario is read from an ini file (see ../data/canonical.ini); a few of its global
parameters may be overridden from the command line:
> python cli.py ../data/canonical.ini --seed 7 --report tree --out canonical.json
The exit status is 0 if the release status of every proxy listed in the [Expect] section
of the scenario matches, 1 if some expectation fails, and 2 if the scenario file cannot
be parsed (in which case no report is written).
"""
import argparse, json, logging, os, sys
from dataclasses import dataclass, asdict
if __package__:
    from . import agents
else:   # started as a script: import the package from the parent folder of the repository
    import importlib
    _root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    sys.path.append(os.path.dirname(_root))
    agents = importlib.import_module(os.path.basename(_root) + '.py.agents')

class ParseError(ValueError):
    pass

# gas measured for the protocol contracts on a public test network (reference only, never asserted)
REFERENCE_GAS = {
    'deploy':      889764,
    'charge':      21497,
    'newService':  45612,
    'eventVerify': 175674,
    'close':       13662,
}

# rows of the cost table in protocol order: (phase, step, function)
REPORT_STEPS = [
    ('ET.schedule', 'deploy C_proxy', 'deploy'),
    ('ET.schedule', 'charge()',       'charge'),
    ('ET.schedule', 'newService()',   'newService'),
    ('ET.execute',  'eventVerify()',  'eventVerify'),
    ('Other',       'close()',        'close'),
]


@dataclass
class ReportRow:
    phase:        str
    step:         str
    function:     str
    simulatedGas: object = None
    simulatedUsd: object = None
    referenceGas: object = None
    referenceUsd: object = None


def buildReportRows(report):
    rows = []
    for phase, step, function in REPORT_STEPS:
        gas = report.perFunctionGas.get(function)
        ref = REFERENCE_GAS[function]
        rows.append(ReportRow(phase, step, function,
            gas, None if gas is None else round(report.usd(gas), 6), ref, round(report.usd(ref), 6)))
    return rows


def _fmt(value, fmt):
    return '-' if value is None else fmt % value


def emitReport(report, format='table'):
    '''
    Render a ScenarioReport as octets: 'table' is the human-readable cost table,
    'tree' is a JSON document with sorted keys that parseReport reads back.
    '''
    rows = buildReportRows(report)
    if format == 'tree':
        tree = report.toTree()
        tree['rows'] = [asdict(row) for row in rows]
        return (json.dumps(tree, sort_keys=True, indent=1) + '\n').encode()
    if format != 'table':
        raise ValueError('Unknown report format %s' % format)
    lines = ['Scenario %s, seed %i, %i blocks; gasToEther=%g, etherToUsd=%g' %
        (report.name, report.seed, report.blocks, report.gasToEther, report.etherToUsd),
        '%-12s %-15s %-12s %10s %10s %10s %10s' %
        ('phase', 'step', 'function', 'gas', 'USD', 'ref.gas', 'ref.USD')]
    for row in rows:
        lines.append('%-12s %-15s %-12s %10s %10s %10s %10s' % (row.phase, row.step, row.function,
            _fmt(row.simulatedGas, '%i'), _fmt(row.simulatedUsd, '%.4f'),
            _fmt(row.referenceGas, '%i'), _fmt(row.referenceUsd, '%.4f')))
    lines.append('Release status:')
    for name, status in report.releaseStatus.items():
        lines.append('  %-12s %-13s fee payouts: %i%s' % (name, status, report.feePayouts[name],
            ', released in block %i' % report.releaseBlocks[name] if name in report.releaseBlocks else ''))
    lines.append('Executor profits:')
    for name, profit in report.executorProfits.items():
        lines.append('  %-12s %i' % (name, profit))
    lines.append('Ether conserved: %s' % ('yes' if report.etherConserved else 'NO'))
    return ('\n'.join(lines) + '\n').encode()


def parseReport(data):
    '''read back a report rendered with format='tree' '''
    try:
        tree = json.loads(data.decode() if isinstance(data, bytes) else data)
    except ValueError as ex:
        raise ParseError('Report is not a valid tree: %s' % ex)
    if not isinstance(tree, dict) or 'rows' not in tree or 'releaseStatus' not in tree:
        raise ParseError('Report tree lacks the rows or the release status')
    return tree


def loadScenario(scenarioFile, seed=None, window=None, executors=None):
    '''read the scenario and apply command-line overrides; raises ParseError'''
    try:
        config = agents.readScenario(scenarioFile)
        if seed is not None:      config.seed = seed
        if window is not None:    config.window = window
        if executors is not None: config.executors = executors
        return config.validate()
    except agents.InvalidScript as ex:
        raise ParseError('%s: %s' % (scenarioFile, ex))


def checkExpectations(config, report):
    '''list of the [Expect] entries that the run did not satisfy'''
    return ['%s is %s, expected %s' % (name, report.releaseStatus[name], status)
        for name, status in config.expect.items() if report.releaseStatus[name] != status]


def run(scenarioFile, seed=None, window=None, executors=None, report='table', out=None, verbose=False):
    '''run a scenario, write its report and return the exit status'''
    if verbose:
        logging.basicConfig(level=logging.DEBUG, format='%(name)s: %(message)s')
    try:
        config = loadScenario(scenarioFile, seed, window, executors)
        print('Running scenario %s with seed %i, %i executors, window %i' %
            (config.name, config.seed, config.executors, config.window), file=sys.stderr)
        result = agents.runScenario(config)
    except (ParseError, agents.InvalidScript) as ex:
        print('Cannot parse scenario: %s' % ex, file=sys.stderr)
        return 2
    rendered = emitReport(result, report)
    if out:
        with open(out, 'wb') as f:
            f.write(rendered)
        print('Report written to %s' % out, file=sys.stderr)
    else:
        sys.stdout.write(rendered.decode())
        sys.stdout.flush()
    failures = checkExpectations(config, result)
    for failure in failures:
        print('Expectation failed: %s' % failure, file=sys.stderr)
    return 1 if failures else 0


def main(argv=None):
    parser = argparse.ArgumentParser(description='Run an EventWarden scenario and report the cost of each protocol step')
    parser.add_argument('scenario', help='scenario ini file')
    parser.add_argument('--seed', type=int, help='random seed (default: from the scenario file)')
    parser.add_argument('--window', type=int, help='blockhash window in blocks (default: from the scenario file, or 256)')
    parser.add_argument('--executors', type=int, help='number of executors (default: from the scenario file, or 1)')
    parser.add_argument('--report', choices=['table', 'tree'], default='table', help='report format (default: table)')
    parser.add_argument('--out', help='output file (default: standard output)')
    parser.add_argument('--verbose', action='store_true', help='log the activity of the chain and the agents')
    args = parser.parse_args(argv)
    return run(args.scenario, args.seed, args.window, args.executors, args.report, args.out, args.verbose)


if __name__ == '__main__':
    sys.exit(main())
