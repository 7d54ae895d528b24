'''
Accounts, transactions, contract messages, logs and gas metering of the simulated chain.
Contracts are native Python handlers registered by name instead of bytecode;
a handler is a subclass of `Contract` whose public entry points are marked with
the `function` decorator carrying their signature string:
>>> @registerHandler('Counter')
... class Counter(Contract):
...     @function('increment()')
...     def increment(self):
...         self.ctx.store(b'n', rlp.encodeUint(rlp.decodeUint(self.ctx.load(b'n')) + 1))
Call data is the 4-octet selector (first octets of keccak256 of the signature) followed by the
RLP list of arguments; creation data is the RLP list [handler name, [constructor arguments]].
The gas price is fixed at 1 and gas is burned, so the sum of all balances plus the burned gas
is a constant of the simulation.
'''
import copy as _copy, logging as _logging
from enum import Enum as _Enum
from dataclasses import dataclass as _dataclass, field as _field
from . import rlp as _rlp, trie as _trie, chain as _chain

_log = _logging.getLogger(__name__)

class VMError(RuntimeError):
    pass

class TransactionRejected(VMError):
    '''a transaction that cannot even start executing; it is left out of the block'''
    pass

class Unclassifiable(TransactionRejected):
    pass

class UnknownSender(TransactionRejected):
    pass

class InsufficientBalance(TransactionRejected):
    pass

class InsufficientContractBalance(VMError):
    pass

class UnknownTarget(VMError):
    pass

class OutOfGas(VMError):
    pass

class ContractDestroyed(VMError):
    pass

class HandlerFailure(VMError):
    '''generic revert raised by handlers or by the dispatcher'''
    pass


class TxKind(_Enum):
    FundTransfer       = 'FundTransfer'
    FunctionInvocation = 'FunctionInvocation'
    ContractCreation   = 'ContractCreation'


MAX_CALL_DEPTH = 64


@_dataclass
class GasSchedule:
    baseTx:                int = 21000
    perDataOctet:          int = 16
    perStorageWrite:       int = 5000
    perLog:                int = 1125
    perMessage:            int = 700
    perContractCreated:    int = 32000
    perProofOctetVerified: int = 6

    def __post_init__(self):
        for name, value in vars(self).items():
            if not isinstance(value, int) or value <= 0:
                raise ValueError('Gas schedule entry %s must be a positive integer, got %r' % (name, value))

    def override(self, **entries):
        '''copy of the schedule with some entries replaced'''
        unknown = set(entries) - set(vars(self))
        if unknown:
            raise ValueError('Unknown gas schedule entries: %s' % ', '.join(sorted(unknown)))
        values = dict(vars(self))
        values.update(entries)
        return GasSchedule(**values)


@_dataclass
class Transaction:
    sender:    bytes
    recipient: object     # 20-octet address, or None for contract creation
    value:     int = 0
    data:      bytes = b''
    gasLimit:  int = 1000000

    def toRlp(self):
        return [self.sender, self.recipient or b'', _rlp.encodeUint(self.value),
            self.data, _rlp.encodeUint(self.gasLimit)]

    @staticmethod
    def fromRlp(item):
        if not isinstance(item, list) or len(item) != 5:
            raise _rlp.MalformedRlp('Transaction must be a list of 5 items')
        return Transaction(item[0], item[1] or None, _rlp.decodeUint(item[2]), item[3], _rlp.decodeUint(item[4]))


@_dataclass
class Message:
    sender:    bytes      # always a contract
    recipient: object     # None means contract creation
    value:     int = 0
    data:      bytes = b''


@_dataclass
class MessageResult:
    success: bool
    error:   object = None
    created: object = None   # address of a contract created by the message


@_dataclass
class TraceEntry:
    block:     int
    txIndex:   int
    depth:     int
    kind:      str
    sender:    bytes
    recipient: object
    value:     int
    success:   bool = True


@_dataclass
class Account:
    balance:   int = 0
    nonce:     int = 0
    handler:   object = None      # registered handler name for contracts, None for EOAs
    storage:   dict = _field(default_factory=dict)
    destroyed: bool = False

    @property
    def isContract(self):
        return self.handler is not None


def toAddress(value):
    '''normalize a hex string or bytes into a 20-octet address'''
    if isinstance(value, str):
        value = bytes.fromhex(value[2:] if value.startswith('0x') else value)
    value = bytes(value)
    if len(value) != 20:
        raise ValueError('Address must be exactly 20 octets, got %i' % len(value))
    return value


def deriveAddress(creator, nonce):
    '''address of the contract created by `creator` when its nonce equals `nonce`'''
    return _trie.keccak256(_rlp.encode([toAddress(creator), _rlp.encodeUint(nonce)]))[12:]


def selector(signature):
    return _trie.keccak256(signature.encode())[:4]


def encodeCall(signature, args=()):
    return selector(signature) + _rlp.encode(list(args))


def encodeCreation(handlerName, args=()):
    return _rlp.encode([handlerName.encode(), list(args)])


def decodeCreation(data):
    item = _rlp.decode(data)
    if not isinstance(item, list) or len(item) != 2 or not isinstance(item[0], bytes) \
        or not isinstance(item[1], list):
        raise HandlerFailure('Creation payload must be [handler name, [arguments]]')
    return item[0].decode(errors='replace'), item[1]


### ------------------------------------------
### contract handlers and their registry

HANDLERS = dict()

def function(signature):
    '''mark a Contract method as a callable entry point with the given signature'''
    def decorate(method):
        method._signature = signature
        return method
    return decorate


def registerHandler(name):
    '''class decorator: register a Contract subclass under the given handler name'''
    def decorate(cls):
        cls.handlerName = name
        cls.dispatch = dict()
        for attr in dir(cls):
            signature = getattr(getattr(cls, attr), '_signature', None)
            if signature is not None:
                cls.dispatch[selector(signature)] = attr
        HANDLERS[name] = cls
        return cls
    return decorate


class Contract(object):
    '''base class of native contract handlers; `self.ctx` is the host interface'''
    dispatch = dict()
    def __init__(self, ctx):
        self.ctx = ctx
    def construct(self, *args):
        if args:
            raise HandlerFailure('%s takes no constructor arguments' % type(self).__name__)
    @classmethod
    def signatures(cls):
        return sorted(getattr(cls, method)._signature for method in cls.dispatch.values())


class GasMeter(object):
    def __init__(self, limit):
        self.limit = limit
        self.used  = 0
    @property
    def remaining(self):
        return self.limit - self.used
    def consume(self, amount, reason=''):
        if self.used + amount > self.limit:
            raise OutOfGas('Out of gas: %s needs %i, used %i of %i' % (reason, amount, self.used, self.limit))
        self.used += amount


class WorldState(object):
    '''the set of accounts plus the total amount of gas burned so far'''
    def __init__(self):
        self.accounts = dict()
        self.burned   = 0
    def get(self, address):
        return self.accounts.get(address)
    def getOrCreate(self, address):
        if address not in self.accounts:
            self.accounts[address] = Account()
        return self.accounts[address]
    def balance(self, address):
        account = self.accounts.get(address)
        return account.balance if account else 0
    def total(self):
        '''sum of all balances plus burned gas; constant under every transaction'''
        return sum(account.balance for account in self.accounts.values()) + self.burned
    def snapshot(self):
        return _copy.deepcopy(self.accounts), self.burned
    def restore(self, snap):
        self.accounts = _copy.deepcopy(snap[0])
        self.burned   = snap[1]


def classify(tx, state=None):
    '''
    Determine the category of a transaction:
      no recipient, non-empty data and zero value  => ContractCreation;
      recipient is a contract and data is non-empty => FunctionInvocation;
      recipient is not a contract and value > 0     => FundTransfer.
    Anything else raises Unclassifiable.  Without `state`, every recipient counts as an EOA.
    '''
    if tx.recipient is None:
        if tx.data and tx.value == 0:
            return TxKind.ContractCreation
        if tx.data:
            raise Unclassifiable('Contract creation cannot carry value')
        raise Unclassifiable('Transaction without recipient must carry creation data')
    account = state.get(tx.recipient) if state is not None else None
    if account is not None and account.isContract:
        if tx.data:
            return TxKind.FunctionInvocation
        raise Unclassifiable('Transaction to a contract must carry call data')
    if tx.value > 0:
        return TxKind.FundTransfer
    raise Unclassifiable('Transaction to an externally owned account must transfer a positive value')


class ExecutionContext(object):
    '''
    Host interface handed to a contract handler for one call frame:
    storage access, logs, messages, self-destruction, block information and gas.
    '''
    def __init__(self, vm, address, caller, value, depth):
        self.vm      = vm
        self.address = address
        self.caller  = caller
        self.value   = value
        self.depth   = depth

    @property
    def origin(self):
        return self.vm._tx.sender

    @property
    def blockNumber(self):
        return self.vm.blockNumber

    @property
    def schedule(self):
        return self.vm.schedule

    @property
    def balance(self):
        return self.vm.state.balance(self.address)

    def handlerOf(self, address):
        '''handler name of the contract at `address`, None for an account without code'''
        account = self.vm.state.get(address)
        return account.handler if account is not None and account.isContract else None

    def useGas(self, amount, reason='handler'):
        self.vm._meter.consume(amount, reason)

    def load(self, key):
        return self.vm.state.get(self.address).storage.get(key, b'')

    def store(self, key, value):
        self.useGas(self.schedule.perStorageWrite, 'storage write')
        storage = self.vm.state.get(self.address).storage
        if value:
            storage[key] = bytes(value)
        else:
            storage.pop(key, None)

    def emitLog(self, topics, data=b''):
        self.useGas(self.schedule.perLog, 'log')
        for topic in topics:
            if len(topic) != 32:
                raise HandlerFailure('Log topics must be 32 octets')
        self.vm._logs.append(_chain.LogEntry(self.address, [bytes(t) for t in topics], bytes(data)))

    def blockhash(self, number):
        return self.vm.blockhash(number)

    def sendMessage(self, recipient, value=0, data=b'', catchFailure=False):
        '''
        Send a message from this contract.  A missing recipient creates a contract from `data`.
        With catchFailure=False a failing target reverts the whole transaction;
        otherwise only the message's own effects are undone and the failure is returned.
        '''
        return self.vm._message(Message(self.address, recipient, value, data), self.depth+1, catchFailure)

    def selfDestruct(self, beneficiary):
        '''forward the whole balance to `beneficiary` and disable the contract'''
        self.useGas(self.schedule.perMessage, 'self-destruct')
        account = self.vm.state.get(self.address)
        amount  = account.balance
        account.balance = 0
        account.destroyed = True
        self.vm.state.getOrCreate(beneficiary).balance += amount
        self.vm._trace('selfdestruct', self.depth, self.address, beneficiary, amount)


class VM(object):
    '''
    Sequential executor of transactions over a WorldState.
    The chain opens a block with beginBlock() and feeds it transactions one by one.
    '''
    def __init__(self, schedule=None, blockhash=None):
        self.schedule  = schedule or GasSchedule()
        self.state     = WorldState()
        self.trace     = list()
        self._blockhash= blockhash
        self.blockNumber = 0
        self.timestamp   = 0
        self.cumulativeGas = 0
        self.txIndex     = 0
        self._tx = self._meter = self._logs = None

    def blockhash(self, number):
        return self._blockhash(number, self.blockNumber) if self._blockhash else None

    def classify(self, tx):
        return classify(tx, self.state)

    def beginBlock(self, number, timestamp):
        self.blockNumber   = number
        self.timestamp     = timestamp
        self.cumulativeGas = 0
        self.txIndex       = 0

    def _trace(self, kind, depth, sender, recipient, value, success=True):
        self.trace.append(TraceEntry(self.blockNumber, self.txIndex, depth, kind, sender, recipient, value, success))

    def _transfer(self, sender, recipient, value):
        source = self.state.get(sender)
        if source.balance < value:
            raise InsufficientContractBalance('Balance %i of %s is below %i' % (source.balance, sender.hex(), value))
        source.balance -= value
        self.state.getOrCreate(recipient).balance += value

    def _invoke(self, address, caller, value, data, depth):
        account = self.state.get(address)
        if account.destroyed:
            raise ContractDestroyed('Contract %s has self-destructed' % address.hex())
        cls = HANDLERS.get(account.handler)
        if cls is None:
            raise HandlerFailure('No handler registered under the name %r' % account.handler)
        if not data:
            return None   # plain value transfer into the contract
        method = cls.dispatch.get(bytes(data[:4]))
        if method is None:
            raise HandlerFailure('%s has no function with selector %s' % (account.handler, bytes(data[:4]).hex()))
        try:
            args = _rlp.decodeList(data[4:])
        except _rlp.RlpError as ex:
            raise HandlerFailure('Malformed call arguments: %s' % ex)
        return getattr(cls(ExecutionContext(self, address, caller, value, depth)), method)(*args)

    def _create(self, creator, data, depth, nonce=None):
        # nonce is given for transactions, which bump the originator's nonce before executing
        name, args = decodeCreation(data)
        if name not in HANDLERS:
            raise HandlerFailure('No handler registered under the name %r' % name)
        self._meter.consume(self.schedule.perContractCreated, 'contract creation')
        if nonce is None:
            account = self.state.get(creator)
            nonce = account.nonce
            account.nonce += 1
        address = deriveAddress(creator, nonce)
        if address in self.state.accounts:
            raise HandlerFailure('Address collision at %s' % address.hex())
        self.state.accounts[address] = Account(handler=name)
        HANDLERS[name](ExecutionContext(self, address, creator, 0, depth)).construct(*args)
        return address

    def _message(self, msg, depth, catchFailure):
        if depth > MAX_CALL_DEPTH:
            raise HandlerFailure('Call depth limit exceeded')
        self._meter.consume(self.schedule.perMessage, 'message')
        if msg.value > self.state.balance(msg.sender):
            raise InsufficientContractBalance('Contract %s cannot send %i, balance is %i' %
                (msg.sender.hex(), msg.value, self.state.balance(msg.sender)))
        target = self.state.get(msg.recipient) if msg.recipient is not None else None
        if msg.recipient is not None and (target is None or not target.isContract) and msg.data:
            raise UnknownTarget('Message with call data to %s, which is not a contract' % msg.recipient.hex())
        snap = self.state.snapshot()
        nlogs, ntrace = len(self._logs), len(self.trace)
        kind = 'create' if msg.recipient is None else 'message'
        self._trace(kind, depth, msg.sender, msg.recipient, msg.value)
        entry = self.trace[-1]
        try:
            if msg.recipient is None:
                if msg.value:
                    raise HandlerFailure('Contract creation cannot carry value')
                created = self._create(msg.sender, msg.data, depth)
                entry.recipient = created
                return MessageResult(True, created=created)
            self._transfer(msg.sender, msg.recipient, msg.value)
            if target is not None and target.isContract:
                self._invoke(msg.recipient, msg.sender, msg.value, msg.data, depth)
            return MessageResult(True)
        except OutOfGas:
            raise
        except Exception as ex:
            if not catchFailure:
                raise
            _log.debug('message from %s failed: %s', msg.sender.hex(), ex)
            self.state.restore(snap)
            del self._logs[nlogs:]
            del self.trace[ntrace+1:]
            entry.success = False
            return MessageResult(False, error=ex)

    def executeTransaction(self, tx):
        '''
        Execute one transaction inside the current block and return its receipt.
        UnknownSender, InsufficientBalance and Unclassifiable are raised before any effect;
        every other failure produces a status-0 receipt with all effects except gas undone.
        '''
        sender = self.state.get(tx.sender)
        if sender is None:
            raise UnknownSender('Sender %s has no account' % bytes(tx.sender).hex())
        if sender.isContract:
            raise UnknownSender('Contract %s cannot originate transactions' % tx.sender.hex())
        kind = self.classify(tx)
        if sender.balance < tx.value + tx.gasLimit:
            raise InsufficientBalance('Sender %s has %i, needs value %i plus gas limit %i' %
                (tx.sender.hex(), sender.balance, tx.value, tx.gasLimit))
        self._tx, self._meter, self._logs = tx, GasMeter(tx.gasLimit), []
        nonce = sender.nonce
        sender.nonce += 1
        snap   = self.state.snapshot()
        ntrace = len(self.trace)
        self._trace('tx', 0, tx.sender, tx.recipient, tx.value)
        created = None
        error   = None
        try:
            self._meter.consume(self.schedule.baseTx + self.schedule.perDataOctet * len(tx.data), 'intrinsic')
            if kind is TxKind.ContractCreation:
                created = self._create(tx.sender, tx.data, 0, nonce)
                self.trace[ntrace].recipient = created
            else:
                self._transfer(tx.sender, tx.recipient, tx.value)
                if kind is TxKind.FunctionInvocation:
                    self._invoke(tx.recipient, tx.sender, tx.value, tx.data, 0)
            status = 1
        except Exception as ex:
            if isinstance(ex, OutOfGas):
                self._meter.used = self._meter.limit
            _log.debug('transaction %i in block %i failed: %s: %s',
                self.txIndex, self.blockNumber, type(ex).__name__, ex)
            self.state.restore(snap)
            del self.trace[ntrace+1:]
            self.trace[ntrace].success = False
            self._logs, created, error, status = [], None, ex, 0
        gasUsed = self._meter.used
        self.state.get(tx.sender).balance -= gasUsed
        self.state.burned += gasUsed
        self.cumulativeGas += gasUsed
        receipt = _chain.Receipt(status, self.cumulativeGas, self._logs,
            gasUsed=gasUsed, contractAddress=created, kind=kind,
            error=None if error is None else '%s: %s' % (type(error).__name__, error))
        self.txIndex += 1
        self._tx = self._meter = self._logs = None
        return receipt
