'''
Deterministic discrete-event driver of EventWarden scenarios.
A scenario has two kinds of agents: users, whose actions (deploy a proxy, charge it, register it
with the hub, close it) are scripted block by block, and executors, which follow the hub's
NewService announcements, watch every new block for the committed events, and race to prove them
to the proxy contract in exchange for the service fee.
The scenario is described by an INI file in the same layout as the model parameter files in data/:
sections [Global], [Gas], [Actor <name>], [Contract <name>], [Proxy <name>], [Script], [Expect];
see data/canonical.ini for a commented example, and readScenario for the exact grammar.
Running it
>>> report = agents.runScenario(agents.readScenario('data/canonical.ini'))
>>> report.releaseStatus
{'p1': 'Triggered', 'p2': 'Closed'}
'''
import logging as _logging, re as _re, numpy as _numpy
from dataclasses import dataclass as _dataclass, field as _field
try:
    from configparser import RawConfigParser as _RawConfigParser, Error as _ConfigError
except ImportError:
    from ConfigParser import RawConfigParser as _RawConfigParser, Error as _ConfigError
from . import rlp as _rlp, trie as _trie, chain as _chain, vm as _vm, warden as _warden

_log = _logging.getLogger(__name__)

class AgentError(RuntimeError):
    pass

class EventNotFound(AgentError):
    pass

class WindowExpired(AgentError):
    pass

class InvalidScript(AgentError):
    pass


SETUP_BLOCK = 1
DEPLOYER    = 'deployer'
DEPLOYER_BALANCE = 10**15
FILLER_COUNT     = 4
FILLER_BALANCE   = 10**12
TRANSFER_GAS     = 21000

VERBS = {   # verb => (min, max) number of arguments
    'deploy-proxy':     (1, 1),
    'charge':           (1, 2),
    'register':         (1, 1),
    'emit-event':       (1, 1),
    'emit-other':       (2, 3),
    'close':            (1, 1),
    'disable-executor': (1, 1),
    'advance-blocks':   (1, 1),
}

# protocol functions reported per step, in protocol order
PROTOCOL_FUNCTIONS = ('deploy', 'charge', 'newService', 'eventVerify', 'close')

RELEASE_STATUS = {
    _warden.ProxyState.Deployed:   'NotTriggered',
    _warden.ProxyState.Funded:     'NotTriggered',
    _warden.ProxyState.Registered: 'NotTriggered',
    _warden.ProxyState.Triggered:  'Triggered',
    _warden.ProxyState.Closed:     'Closed',
}


def actorAddress(name):
    '''deterministic 20-octet address of a named externally owned account'''
    return _trie.keccak256(b'eventwarden actor ' + name.encode())[12:]


def executorName(index):
    return 'executor%i' % (index+1)


@_dataclass
class ProxySpec:
    name:      str
    owner:     str
    kind:      _vm.TxKind
    recipient: object = None   # actor or contract name, or a 0x-prefixed address
    value:     int = 0
    fee:       int = 0
    function:  str = _warden.SET_SENTINEL
    argument:  bytes = b''
    handler:   str = _warden.TARGET_HANDLER
    emitter:   str = ''
    topics:    list = _field(default_factory=list)
    data:      bytes = b''


@_dataclass
class Step:
    block: int
    verb:  str
    args:  list
    line:  str = ''


@_dataclass
class ScenarioConfig:
    name:       str = 'scenario'
    seed:       int = 0
    window:     int = 256
    interval:   int = 15
    executors:  int = 1
    delays:     list = _field(default_factory=list)
    balance:    int = 10**9
    background: int = 0
    gasLimit:   int = _warden.DEFAULT_GAS_LIMIT
    gasToEther: float = 1.67e-8
    etherToUsd: float = 175.
    gas:        dict = _field(default_factory=dict)
    actors:     dict = _field(default_factory=dict)   # name => balance
    contracts:  dict = _field(default_factory=dict)   # name => handler
    proxies:    dict = _field(default_factory=dict)   # name => ProxySpec
    script:     list = _field(default_factory=list)   # Steps, by block
    expect:     dict = _field(default_factory=dict)   # proxy name => release status

    def delayOf(self, index):
        return self.delays[index] if index < len(self.delays) else 1

    def validate(self):
        '''check that every reference in the scenario points to a declared actor, contract or proxy'''
        if self.window <= 0:
            raise InvalidScript('Blockhash window must be positive')
        if self.executors < 0:
            raise InvalidScript('Number of executors cannot be negative')
        if any(delay < 0 for delay in self.delays):
            raise InvalidScript('Reaction delays cannot be negative')
        try:
            _vm.GasSchedule().override(**self.gas)
        except (ValueError, TypeError) as ex:
            raise InvalidScript(str(ex))
        names = set(self.actors) | set(self.contracts) | set(self.proxies)
        if len(names) != len(self.actors) + len(self.contracts) + len(self.proxies) or DEPLOYER in names:
            raise InvalidScript('Actor, contract and proxy names must be distinct and differ from "%s"' % DEPLOYER)
        for proxy in self.proxies.values():
            if proxy.owner not in self.actors:
                raise InvalidScript('Owner %s of proxy %s is not a declared actor' % (proxy.owner, proxy.name))
            if self.contracts.get(proxy.emitter) != _warden.SOURCE_HANDLER:
                raise InvalidScript('Emitter %s of proxy %s is not an EventSource contract' % (proxy.emitter, proxy.name))
            if proxy.kind is not _vm.TxKind.ContractCreation:
                self._checkRecipient(proxy)
            elif proxy.handler not in _vm.HANDLERS:
                raise InvalidScript('Unknown handler %s in proxy %s' % (proxy.handler, proxy.name))
            if proxy.kind is _vm.TxKind.FunctionInvocation and proxy.function not in \
                _vm.HANDLERS[_warden.TARGET_HANDLER].signatures():
                raise InvalidScript('Target has no function %s (proxy %s)' % (proxy.function, proxy.name))
            try:
                reservedTransaction(proxy, lambda name: bytes(20)).check()
            except ValueError as ex:
                raise InvalidScript('Proxy %s: %s' % (proxy.name, ex))
        for step in self.script:
            self._checkStep(step)
        for proxy, status in self.expect.items():
            if proxy not in self.proxies:
                raise InvalidScript('Expectation for undeclared proxy %s' % proxy)
            if status not in ('Triggered', 'NotTriggered', 'Closed'):
                raise InvalidScript('Expected status of %s must be Triggered, NotTriggered or Closed' % proxy)
        return self

    def _checkRecipient(self, proxy):
        if proxy.recipient is None:
            raise InvalidScript('Proxy %s needs a recipient' % proxy.name)
        if proxy.recipient in self.actors or proxy.recipient in self.contracts:
            return
        try:
            _vm.toAddress(proxy.recipient)
        except ValueError:
            raise InvalidScript('Recipient %s of proxy %s is not declared' % (proxy.recipient, proxy.name))

    def _checkStep(self, step):
        where = '"%s"' % step.line if step.line else 'step at block %i' % step.block
        if step.block <= SETUP_BLOCK:
            raise InvalidScript('%s: block 1 is reserved for the setup, steps start at block 2' % where)
        if step.verb not in VERBS:
            raise InvalidScript('%s: unknown verb %s' % (where, step.verb))
        nmin, nmax = VERBS[step.verb]
        if not (nmin <= len(step.args) <= nmax):
            raise InvalidScript('%s: %s takes %i to %i arguments' % (where, step.verb, nmin, nmax))
        target = step.args[0]
        if step.verb == 'advance-blocks' or (step.verb == 'charge' and len(step.args) == 2):
            number = step.args[-1]
            if not number.isdigit():
                raise InvalidScript('%s: %s is not a non-negative integer' % (where, number))
        if step.verb == 'disable-executor':
            if target not in [executorName(i) for i in range(self.executors)]:
                raise InvalidScript('%s: no executor named %s' % (where, target))
        elif step.verb == 'emit-other':
            if self.contracts.get(target) != _warden.SOURCE_HANDLER:
                raise InvalidScript('%s: %s is not an EventSource contract' % (where, target))
        elif step.verb != 'advance-blocks' and target not in self.proxies:
            raise InvalidScript('%s: %s is not a declared proxy' % (where, target))


def _int(section, key, value):
    try:
        return int(float(value)) if 'e' in value.lower() else int(value)
    except ValueError:
        raise InvalidScript('[%s] %s = %s is not an integer' % (section, key, value))


def _float(section, key, value):
    try:
        return float(value)
    except ValueError:
        raise InvalidScript('[%s] %s = %s is not a number' % (section, key, value))


def parseOctets(text):
    '''0x-prefixed hex, or else the UTF-8 encoding of the text'''
    text = text.strip()
    if text.startswith('0x'):
        try:
            return bytes.fromhex(text[2:])
        except ValueError:
            raise InvalidScript('Invalid hex string %s' % text)
    return text.encode()


def parseTopic(text):
    '''a 32-octet topic: either 0x-prefixed hex of 32 octets, or an event signature that is hashed'''
    text = text.strip()
    if text.startswith('0x'):
        topic = parseOctets(text)
        if len(topic) != 32:
            raise InvalidScript('Topic %s is not 32 octets' % text)
        return topic
    return _trie.keccak256(text.encode())


def parseSteps(text):
    '''
    Parse the step lines of the [Script] section.  Each non-empty line reads
      at block <n>: <verb> <arguments...>
    and lines starting with # are comments.  Steps are returned sorted by block (stable).
    '''
    steps = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        match = _re.match(r'^at\s+block\s+(\d+)\s*:\s*(\S+)(.*)$', line, _re.IGNORECASE)
        if not match:
            raise InvalidScript('Cannot parse step "%s", expected "at block <n>: <verb> <args>"' % line)
        steps.append(Step(int(match.group(1)), match.group(2).lower(), match.group(3).split(), line))
    return sorted(steps, key=lambda step: step.block)


def readScenario(filename, text=None):
    '''
    Read a scenario from an INI file (or from `text` if given; the filename then only names it).
    Raises InvalidScript for anything that does not parse or refers to undeclared names.
    '''
    ini = _RawConfigParser()
    ini.optionxform = str   # proxy names in [Expect] keep their case
    try:
        if text is None:
            if not ini.read(filename):
                raise InvalidScript('Cannot read scenario file %s' % filename)
        else:
            ini.read_string(text, filename)
    except _ConfigError as ex:
        raise InvalidScript('Malformed scenario file: %s' % ex)
    name = str(filename).replace('\\', '/').split('/')[-1]
    config = ScenarioConfig(name=name[:-4] if name.endswith('.ini') else name)
    schedule = vars(_vm.GasSchedule())
    for sec in ini.sections():
        raw   = dict(ini.items(sec))
        items = dict((k.lower(), v) for k, v in raw.items())
        key, _, arg = sec.partition(' ')
        key, arg = key.lower(), arg.strip()
        if key == 'global':
            for k, v in items.items():
                if k in ('seed', 'window', 'interval', 'executors', 'balance', 'background'):
                    setattr(config, k, _int(sec, k, v))
                elif k == 'gaslimit':
                    config.gasLimit = _int(sec, k, v)
                elif k == 'gastoether':
                    config.gasToEther = _float(sec, k, v)
                elif k == 'ethertousd':
                    config.etherToUsd = _float(sec, k, v)
                elif k == 'delays':
                    config.delays = [_int(sec, k, d) for d in filter(None, _re.split(r'[,\s]', v))]
                else:
                    raise InvalidScript('Unknown parameter %s in [%s]' % (k, sec))
        elif key == 'gas':
            lower = dict((n.lower(), n) for n in schedule)
            for k, v in items.items():
                if k not in lower:
                    raise InvalidScript('Unknown gas schedule entry %s' % k)
                config.gas[lower[k]] = _int(sec, k, v)
        elif key == 'actor':
            config.actors[arg] = _int(sec, 'balance', items.get('balance', '0'))
        elif key == 'contract':
            handler = items.get('handler', _warden.SOURCE_HANDLER)
            if handler not in (_warden.SOURCE_HANDLER, _warden.TARGET_HANDLER):
                raise InvalidScript('[%s] handler must be %s or %s' % (sec, _warden.SOURCE_HANDLER, _warden.TARGET_HANDLER))
            config.contracts[arg] = handler
        elif key == 'proxy':
            config.proxies[arg] = _readProxy(sec, arg, items)
        elif key == 'script':
            config.script = parseSteps(items.get('steps', ''))
        elif key == 'expect':
            config.expect = raw
        else:
            raise InvalidScript('Unknown section [%s]' % sec)
        if key in ('actor', 'contract', 'proxy') and not arg:
            raise InvalidScript('Section [%s] needs a name' % sec)
    return config.validate()


def _readProxy(sec, name, items):
    try:
        kind = _vm.TxKind(items.get('kind', 'FundTransfer'))
    except ValueError:
        raise InvalidScript('[%s] kind must be FundTransfer, FunctionInvocation or ContractCreation' % sec)
    return ProxySpec(name,
        owner     = items.get('owner', ''),
        kind      = kind,
        recipient = items.get('recipient'),
        value     = _int(sec, 'value', items.get('value', '0')),
        fee       = _int(sec, 'fee',   items.get('fee',   '0')),
        function  = items.get('function', _warden.SET_SENTINEL),
        argument  = parseOctets(items.get('argument', '')),
        handler   = items.get('handler', _warden.TARGET_HANDLER),
        emitter   = items.get('emitter', ''),
        topics    = [parseTopic(t) for t in filter(None, items.get('topics', '').split(';'))],
        data      = parseOctets(items.get('data', '')))


def reservedTransaction(proxy, resolve):
    '''the ReservedTransaction of a proxy, with names turned into addresses by `resolve`'''
    if proxy.kind is _vm.TxKind.ContractCreation:
        return _warden.ReservedTransaction(proxy.kind, None, proxy.value, _vm.encodeCreation(proxy.handler))
    payload = _vm.encodeCall(proxy.function, [proxy.argument] if '()' not in proxy.function else []) \
        if proxy.kind is _vm.TxKind.FunctionInvocation else b''
    return _warden.ReservedTransaction(proxy.kind, resolve(proxy.recipient), proxy.value, payload)


### ------------------------------------------------
### executors

def scanBlockForMatches(block, watchlist):
    '''
    Find the log entries of a block that match watched events.
    Arguments:
      block:     chain.Block;
      watchlist: dict of proxy address => expected LogEntry.
    Returns:
      list of (proxy, receiptIndex, logIndex), in receipt order, then log order.
    '''
    digests = dict((proxy, expected.digest()) for proxy, expected in watchlist.items())
    result = []
    for receiptIndex, receipt in enumerate(block.receipts):
        for logIndex, entry in enumerate(receipt.logs):
            digest = None
            for proxy, expected in watchlist.items():
                if entry.emitter != expected.emitter:
                    continue
                digest = digest or entry.digest()
                if digest == digests[proxy]:
                    result.append((proxy, receiptIndex, logIndex))
    return result


def buildProofBundle(chainView, proxy, eventBlock):
    '''
    Assemble the eventVerify arguments proving that the event committed to by `proxy`
    was logged in block `eventBlock`, as seen from the block in which the call is to be included.
    Raises WindowExpired if the block is no longer visible to contracts, and EventNotFound
    if it does not exist yet or contains no matching log entry.
    '''
    if chainView.blockhash(eventBlock) is None:
        if eventBlock < chainView.current - chainView.window:
            raise WindowExpired('Block %i left the blockhash window of block %i' % (eventBlock, chainView.current))
        raise EventNotFound('Block %i is not visible from block %i' % (eventBlock, chainView.current))
    expected = _warden.readProxy(chainView.chain.state, proxy).expectedLog
    block = chainView.getBlock(eventBlock)
    matches = scanBlockForMatches(block, {proxy: expected})
    if not matches:
        raise EventNotFound('Block %i has no log matching the event of proxy %s' % (eventBlock, proxy.hex()))
    _, receiptIndex, logIndex = matches[0]
    return _warden.ProofBundle(eventBlock, block.header.encode(),
        _trie.prove(chainView.receiptStore(eventBlock), receiptIndex), receiptIndex, logIndex)


@_dataclass
class ExecutorAgent:
    '''
    An executor: learns proxies from the hub's NewService logs, watches blocks for their events
    and submits eventVerify `reactionDelayBlocks` blocks after seeing the event (at least one).
    '''
    name:                str
    address:             bytes
    reactionDelayBlocks: int = 1
    active:              bool = True
    watchlist:           dict = _field(default_factory=dict)
    served:              set  = _field(default_factory=set)

    @property
    def submissionDelay(self):
        return max(self.reactionDelayBlocks, 1)

    def observe(self, chain, block, hub):
        '''
        React to a newly appended block; return the list of (proxy, eventBlock) the executor
        commits to serve, to be submitted in block `block.number + submissionDelay`.
        '''
        if not self.active:
            return []
        learned = dict()
        for receipt in block.receipts:
            for entry in receipt.logs:
                if entry.emitter == hub and entry.topics == [_warden.NEW_SERVICE_TOPIC]:
                    proxy = _rlp.decode(entry.data)
                    if proxy not in self.watchlist:
                        learned[proxy] = _warden.readProxy(chain.state, proxy).expectedLog
        self.watchlist.update(learned)
        found = []
        # newly learned proxies: the event may already be in a block still inside the window
        first = max(SETUP_BLOCK, block.number - chain.window)
        for number in range(first, block.number):
            found += [(proxy, number) for proxy, _, _ in scanBlockForMatches(chain.getBlock(number), learned)]
        found += [(proxy, block.number) for proxy, _, _ in scanBlockForMatches(block, self.watchlist)]
        commit = []
        submitAt = block.number + self.submissionDelay
        for proxy, number in found:
            if proxy in self.served:
                continue
            if number < submitAt - chain.window:
                _log.info('%s: event of %s in block %i would expire before block %i',
                    self.name, proxy.hex(), number, submitAt)
                continue
            self.served.add(proxy)
            commit.append((proxy, number))
            _log.debug('%s: event of %s found in block %i, submitting in block %i',
                self.name, proxy.hex(), number, submitAt)
        return commit

    def submit(self, chain, proxy, eventBlock, gasLimit=_warden.DEFAULT_GAS_LIMIT):
        '''build the eventVerify transaction for inclusion in the next block, or None if no proof can be built'''
        if not self.active:
            return None
        try:
            bundle = buildProofBundle(_chain.ChainView(chain), proxy, eventBlock)
        except AgentError as ex:
            _log.info('%s: %s', self.name, ex)
            return None
        return _warden.eventVerifyTx(self.address, proxy, bundle, gasLimit)


### ------------------------------------------------
### scenario driver and its report

@_dataclass
class TimelineEvent:
    block:    int
    actor:    str
    function: str
    target:   str = ''
    status:   int = 1
    gasUsed:  int = 0
    error:    object = None

    def toTree(self):
        return dict(block=self.block, actor=self.actor, function=self.function, target=self.target,
            status=self.status, gasUsed=self.gasUsed, error=self.error)


@_dataclass
class ScenarioReport:
    name:            str
    seed:            int
    blocks:          int
    gasToEther:      float
    etherToUsd:      float
    timeline:        list = _field(default_factory=list)
    perFunctionGas:  dict = _field(default_factory=dict)
    executorProfits: dict = _field(default_factory=dict)
    releaseStatus:   dict = _field(default_factory=dict)
    releaseBlocks:   dict = _field(default_factory=dict)
    eventBlocks:     dict = _field(default_factory=dict)
    feePayouts:      dict = _field(default_factory=dict)
    releaseSuccess:  dict = _field(default_factory=dict)
    addresses:       dict = _field(default_factory=dict)
    etherConserved:  bool = True
    chain:           object = _field(default=None, repr=False, compare=False)

    def usd(self, gas):
        '''cost(USD) = cost(Gas) * GasToEther * EtherToUSD'''
        return gas * self.gasToEther * self.etherToUsd

    @property
    def usdCosts(self):
        return dict((function, self.usd(gas)) for function, gas in self.perFunctionGas.items())

    def toTree(self):
        '''nested dict of plain values (no chain objects), suitable for serialization'''
        return dict(
            scenario        = self.name,
            seed            = self.seed,
            blocks          = self.blocks,
            gasToEther      = self.gasToEther,
            etherToUsd      = self.etherToUsd,
            perFunctionGas  = dict(self.perFunctionGas),
            usdCosts        = dict((k, round(v, 6)) for k, v in self.usdCosts.items()),
            executorProfits = dict(self.executorProfits),
            releaseStatus   = dict(self.releaseStatus),
            releaseBlocks   = dict(self.releaseBlocks),
            eventBlocks     = dict((k, list(v)) for k, v in self.eventBlocks.items()),
            feePayouts      = dict(self.feePayouts),
            releaseSuccess  = dict(self.releaseSuccess),
            addresses       = dict(self.addresses),
            etherConserved  = self.etherConserved,
            timeline        = [event.toTree() for event in self.timeline])


class _Driver(object):
    '''state of one scenario run; see runScenario'''
    def __init__(self, config):
        self.config = config.validate()
        self.rng    = _numpy.random.RandomState(config.seed)
        self.names  = dict()   # name => address
        for name in [DEPLOYER] + list(config.actors):
            self.names[name] = actorAddress(name)
        self.executors = []
        for i in range(config.executors):
            name = executorName(i)
            self.executors.append(ExecutorAgent(name, actorAddress(name), config.delayOf(i)))
            self.names[name] = self.executors[-1].address
        self.fillers = [actorAddress('filler%i' % i) for i in range(FILLER_COUNT if config.background else 0)]
        alloc = dict((self.names[name], balance) for name, balance in config.actors.items())
        alloc[self.names[DEPLOYER]] = DEPLOYER_BALANCE
        for agent in self.executors:
            alloc[agent.address] = config.balance
        for filler in self.fillers:
            alloc[filler] = FILLER_BALANCE
        self.chain = _chain.Chain(alloc, window=config.window, interval=config.interval,
            schedule=_vm.GasSchedule().override(**config.gas))
        self.initialTotal = self.chain.state.total()
        self.initial  = dict((agent.name, config.balance) for agent in self.executors)
        self.pending  = dict()   # block number => list of (delay, address, agent, proxy, eventBlock)
        self.report   = ScenarioReport(config.name, config.seed, 0, config.gasToEther, config.etherToUsd)
        self.nonces   = dict()   # nonces already used by transactions of the block being assembled

    def resolve(self, name):
        if name in self.names:
            return self.names[name]
        return _vm.toAddress(name)

    def proxyAddress(self, name):
        if name not in self.names:
            raise InvalidScript('Proxy %s is used before it is deployed' % name)
        return self.names[name]

    def nextNonce(self, sender):
        if sender not in self.nonces:
            self.nonces[sender] = self.chain.state.get(sender).nonce
        self.nonces[sender] += 1
        return self.nonces[sender] - 1

    def setup(self):
        deployer = self.names[DEPLOYER]
        txs = [(_warden.deployHubTx(deployer, self.config.gasLimit), DEPLOYER, 'deployHub', 'hub')]
        for name, handler in self.config.contracts.items():
            txs.append((_vm.Transaction(deployer, None, 0, _vm.encodeCreation(handler), self.config.gasLimit),
                DEPLOYER, 'deployContract', name))
        for i, (_, _, _, name) in enumerate(txs):
            self.names[name] = _vm.deriveAddress(deployer, i)
        self.hub = self.names['hub']
        self.append(txs)

    def stepTransactions(self, step):
        '''the transactions (with timeline labels) produced by a scripted step'''
        config = self.config
        verb, args = step.verb, step.args
        if verb == 'disable-executor':
            agent = [agent for agent in self.executors if agent.name == args[0]][0]
            agent.active = False
            self.report.timeline.append(TimelineEvent(step.block, agent.name, 'disable', status=1))
            _log.info('block %i: %s disabled', step.block, agent.name)
            return []
        if verb == 'advance-blocks':
            return []
        if verb == 'emit-other':
            data = parseOctets(args[2]) if len(args) > 2 else b''
            tx = _warden.emitEventTx(self.names[DEPLOYER], self.names[args[0]], [parseTopic(args[1])], data, config.gasLimit)
            self.nextNonce(tx.sender)
            return [(tx, DEPLOYER, 'emitEvent', args[0])]
        spec  = config.proxies[args[0]]
        owner = self.names[spec.owner]
        if verb == 'deploy-proxy':
            expected = self.expectedLog(spec)
            tx = _warden.deployProxyTx(owner, reservedTransaction(spec, self.resolve), spec.fee, expected, config.gasLimit)
            self.names[spec.name] = _vm.deriveAddress(owner, self.nextNonce(owner))
            return [(tx, spec.owner, 'deploy', spec.name)]
        proxy = self.proxyAddress(spec.name)
        if verb == 'charge':
            amount = int(args[1]) if len(args) > 1 else spec.fee + spec.value
            tx = _warden.chargeTx(owner, proxy, amount, config.gasLimit)
        elif verb == 'register':
            tx = _warden.newServiceTx(owner, self.hub, proxy, config.gasLimit)
        elif verb == 'close':
            tx = _warden.closeTx(owner, proxy, config.gasLimit)
        else:   # emit-event
            expected = self.expectedLog(spec)
            tx = _warden.emitEventTx(self.names[DEPLOYER], expected.emitter, expected.topics, expected.data, config.gasLimit)
            self.nextNonce(tx.sender)
            return [(tx, DEPLOYER, 'emitEvent', spec.name)]
        self.nextNonce(owner)
        return [(tx, spec.owner, {'charge': 'charge', 'register': 'newService', 'close': 'close'}[verb], spec.name)]

    def expectedLog(self, spec):
        return _chain.LogEntry(self.names[spec.emitter], list(spec.topics), spec.data)

    def backgroundTransactions(self):
        txs = []
        for _ in range(self.config.background):
            i = int(self.rng.randint(0, len(self.fillers)))
            j = (i + 1 + int(self.rng.randint(0, len(self.fillers)-1))) % len(self.fillers)
            value = int(self.rng.randint(1, 1000))
            txs.append((_vm.Transaction(self.fillers[i], self.fillers[j], value, b'', TRANSFER_GAS), None, 'transfer', ''))
        return txs

    def executorTransactions(self, number):
        txs = []
        for delay, _, agent, proxy, eventBlock in sorted(self.pending.pop(number, []), key=lambda p: p[:2]):
            tx = agent.submit(self.chain, proxy, eventBlock, self.config.gasLimit)
            if tx is not None:
                txs.append((tx, agent.name, 'eventVerify', self.proxyName(proxy)))
        return txs

    def proxyName(self, address):
        for name in self.config.proxies:
            if self.names.get(name) == address:
                return name
        return address.hex()

    def append(self, txs):
        block = self.chain.appendBlock([tx for tx, _, _, _ in txs])
        self.nonces = dict()
        receipts = dict((id(tx), receipt) for tx, receipt in zip(block.transactions, block.receipts))
        rejected = dict((id(tx), error) for number, tx, error in self.chain.rejected if number == block.number)
        for tx, actor, function, target in txs:
            if actor is None:
                continue
            receipt = receipts.get(id(tx))
            if receipt is None:
                self.report.timeline.append(TimelineEvent(block.number, actor, function, target, 0, 0,
                    '%s: %s' % (type(rejected[id(tx)]).__name__, rejected[id(tx)])))
                continue
            self.report.timeline.append(TimelineEvent(block.number, actor, function, target,
                receipt.status, receipt.gasUsed, receipt.error))
            if receipt.status == 1 and function in PROTOCOL_FUNCTIONS:
                self.report.perFunctionGas.setdefault(function, receipt.gasUsed)
            if function == 'deploy' and receipt.status == 1:
                self.names[target] = receipt.contractAddress
            if function == 'emitEvent' and receipt.status == 1 and target in self.config.proxies:
                self.report.eventBlocks.setdefault(target, []).append(block.number)
            if function == 'eventVerify' and receipt.status == 1:
                self.report.feePayouts[target] = self.report.feePayouts.get(target, 0) + 1
                self.report.releaseBlocks.setdefault(target, block.number)
                for entry in receipt.logs:
                    if entry.topics == [_warden.RELEASED_TOPIC]:
                        self.report.releaseSuccess[target] = bool(_rlp.decodeUint(_rlp.decode(entry.data)))
        return block

    def observe(self, block):
        for agent in self.executors:
            for proxy, eventBlock in agent.observe(self.chain, block, self.hub):
                self.pending.setdefault(block.number + agent.submissionDelay, []).append(
                    (agent.reactionDelayBlocks, agent.address, agent, proxy, eventBlock))

    def run(self):
        config = self.config
        self.setup()
        last = max([SETUP_BLOCK] + [step.block for step in config.script])
        for step in config.script:
            if step.verb == 'advance-blocks':
                last = max(last, step.block + int(step.args[0]))
        steps = sorted(config.script, key=lambda step: step.block)
        number = SETUP_BLOCK + 1
        while number <= last or any(n >= number for n in self.pending):
            txs = []
            while steps and steps[0].block == number:
                txs += self.stepTransactions(steps.pop(0))
            txs += self.executorTransactions(number)
            if self.fillers:
                txs += self.backgroundTransactions()
            self.observe(self.append(txs))
            number += 1
        return self.finish()

    def finish(self):
        report, state = self.report, self.chain.state
        report.blocks = self.chain.head().number
        for agent in self.executors:
            report.executorProfits[agent.name] = state.balance(agent.address) - self.initial[agent.name]
        for name in self.config.proxies:
            address = self.names.get(name)
            account = state.get(address) if address else None
            status  = 'NotTriggered' if account is None else RELEASE_STATUS[_warden.proxyState(state, address)]
            report.releaseStatus[name] = status
            report.feePayouts.setdefault(name, 0)
        report.addresses = dict((name, address.hex()) for name, address in self.names.items())
        report.etherConserved = state.total() == self.initialTotal
        report.chain = self.chain
        return report


def runScenario(config):
    '''
    Run a scenario to completion and return its ScenarioReport.
    Block 1 deploys the hub and the [Contract] sections; from block 2 on, every block holds
    the scripted user transactions of that block, then the executors' eventVerify calls
    ordered by (reaction delay, executor address), then the background transfers.
    The run lasts until the last scripted block (or the end of an advance-blocks step)
    and while executors still have submissions pending.  The result is a deterministic
    function of the configuration, including its seed.
    '''
    return _Driver(config).run()
