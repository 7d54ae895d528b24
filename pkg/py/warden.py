'''
The EventWarden contracts.
The proxy contract holds a reserved transaction (et-data), the ether needed to release it
(et-ether) and the commitment to the event that must occur first; anyone who proves, with a
receipt Merkle proof, that the event has been logged on chain triggers the release and earns
the service fee.  The hub contract announces new proxies to potential executors.

Lifecycle of a proxy:  Deployed -> Funded (charge) -> Registered (hub newService)
  -> Triggered (eventVerify)  or  -> Closed (owner close, balance returned to the owner).
Both Triggered and Closed are terminal.

Besides the contract handlers, this module provides the client-side helpers that build the
transactions of the protocol (deployProxyTx, chargeTx, newServiceTx, eventVerifyTx, closeTx)
and readProxy(), the full-node view of a proxy's storage.
'''
import logging as _logging
from enum import Enum as _Enum
from dataclasses import dataclass as _dataclass
from . import rlp as _rlp, trie as _trie, chain as _chain, vm as _vm

_log = _logging.getLogger(__name__)

class WardenError(RuntimeError):
    pass

class WrongState(WardenError):
    pass

class InsufficientFunding(WardenError):
    pass

class AlreadyRegistered(WardenError):
    pass

class NotOwner(WardenError):
    pass

class NotHub(WardenError):
    pass

class BlockOutOfWindow(WardenError):
    pass

class BlockMismatch(WardenError):
    pass

class ProofInvalid(WardenError):
    pass

class LogMismatch(WardenError):
    pass


class ProxyState(_Enum):
    Deployed   = 0
    Funded     = 1
    Registered = 2
    Triggered  = 3
    Closed     = 4


PROXY_HANDLER  = 'EventWardenProxy'
HUB_HANDLER    = 'EventWardenHub'
SOURCE_HANDLER = 'EventSource'
TARGET_HANDLER = 'Target'

CHARGE       = 'charge()'
REGISTER     = 'register()'
EVENT_VERIFY = 'eventVerify(uint256,bytes,bytes[],uint256,uint256)'
CLOSE        = 'close()'
NEW_SERVICE  = 'newService(address)'
EMIT_EVENT   = 'emitEvent(bytes32[],bytes)'
SET_SENTINEL = 'setSentinel(bytes)'
FAIL         = 'fail()'

NEW_SERVICE_TOPIC = _trie.keccak256(b'NewService(address)')
RELEASED_TOPIC    = _trie.keccak256(b'Released(bool)')
SENTINEL_KEY      = b'sentinel'

DEFAULT_GAS_LIMIT = 1000000

# storage layout of the proxy
_OWNER, _ETDATA, _COMMITMENT, _EMITTER, _FEE, _EXPECTED, _STATE = \
    b'owner', b'etData', b'commitment', b'emitter', b'fee', b'expectedLog', b'state'


@_dataclass
class ReservedTransaction:
    '''the et-data: what the proxy releases once the event is proven'''
    kind:      _vm.TxKind
    recipient: object = None
    value:     int = 0
    payload:   bytes = b''

    def check(self):
        '''kind-field consistency, mirroring vm.classify'''
        if self.kind is _vm.TxKind.FundTransfer:
            ok = self.recipient is not None and self.value > 0
        elif self.kind is _vm.TxKind.FunctionInvocation:
            ok = self.recipient is not None and len(self.payload) > 0
        else:
            ok = self.recipient is None and len(self.payload) > 0 and self.value == 0
        if not ok:
            raise ValueError('Reserved %s has inconsistent fields' % self.kind.value)
        return self

    def toRlp(self):
        return [self.kind.value.encode(), self.recipient or b'', _rlp.encodeUint(self.value), self.payload]

    @staticmethod
    def fromRlp(item):
        if not isinstance(item, list) or len(item) != 4:
            raise _rlp.MalformedRlp('Reserved transaction must be [kind, recipient, value, payload]')
        try:
            kind = _vm.TxKind(item[0].decode())
        except (ValueError, UnicodeDecodeError):
            raise _rlp.MalformedRlp('Unknown reserved transaction kind %r' % item[0])
        return ReservedTransaction(kind, item[1] or None, _rlp.decodeUint(item[2]), item[3]).check()


@_dataclass
class ProofBundle:
    '''the arguments of eventVerify; every field is supplied by the (untrusted) caller'''
    blockNum:     int
    blockData:    bytes
    proof:        _trie.MerkleProof
    receiptIndex: int
    logIndex:     int

    def toArgs(self):
        return [_rlp.encodeUint(self.blockNum), self.blockData, list(self.proof.nodes),
            _rlp.encodeUint(self.receiptIndex), _rlp.encodeUint(self.logIndex)]


@_dataclass
class ProxyStorage:
    owner:             bytes
    etData:            ReservedTransaction
    etEventCommitment: bytes
    expectedEmitter:   bytes
    serviceFee:        int
    state:             ProxyState
    expectedLog:       _chain.LogEntry
    balance:           int = 0


def eventCommitment(logEntry):
    '''digest of the RLP-encoded expected log entry, which the proxy stores'''
    return logEntry.digest()


### ------------------------------------------------
### contract handlers

@_vm.registerHandler(PROXY_HANDLER)
class ProxyContract(_vm.Contract):
    '''
    Proxy contract.  Constructor arguments: the reserved transaction (RLP item of
    ReservedTransaction), the service fee, and the expected log entry (RLP item of LogEntry).
    The creator becomes the owner.
    '''
    def construct(self, etData, fee, expectedLog):
        reserved = ReservedTransaction.fromRlp(etData)
        expected = _chain.LogEntry.fromRlp(expectedLog)
        ctx = self.ctx
        ctx.store(_OWNER, ctx.caller)
        ctx.store(_ETDATA, _rlp.encode(reserved.toRlp()))
        ctx.store(_COMMITMENT, eventCommitment(expected))
        ctx.store(_EMITTER, expected.emitter)
        ctx.store(_FEE, fee)
        ctx.store(_EXPECTED, expected.encode())
        ctx.store(_STATE, _rlp.encodeUint(ProxyState.Deployed.value) or b'\x00')

    def _state(self):
        return ProxyState(_rlp.decodeUint(self.ctx.load(_STATE).lstrip(b'\x00')))

    def _setState(self, state):
        self.ctx.store(_STATE, _rlp.encodeUint(state.value) or b'\x00')

    def _requireState(self, *allowed):
        state = self._state()
        if state not in allowed:
            raise WrongState('Proxy is %s, expected %s' % (state.name, ' or '.join(s.name for s in allowed)))
        return state

    def _requireOwner(self, who):
        if who != self.ctx.load(_OWNER):
            raise NotOwner('Only the owner may do this, caller is %s' % who.hex())

    def _reserved(self):
        return ReservedTransaction.fromRlp(_rlp.decode(self.ctx.load(_ETDATA)))

    def _fee(self):
        return _rlp.decodeUint(self.ctx.load(_FEE))

    @_vm.function(CHARGE)
    def charge(self):
        self._requireOwner(self.ctx.caller)
        self._requireState(ProxyState.Deployed)
        required = self._fee() + self._reserved().value
        if self.ctx.value < required:
            raise InsufficientFunding('Charged %i, need service fee plus et-ether = %i' % (self.ctx.value, required))
        self._setState(ProxyState.Funded)

    @_vm.function(REGISTER)
    def register(self):
        # only reachable through the hub, within the owner's newService transaction
        if self.ctx.handlerOf(self.ctx.caller) != HUB_HANDLER:
            raise NotHub('Proxies are registered through the hub, caller is %s' % self.ctx.caller.hex())
        self._requireOwner(self.ctx.origin)
        self._requireState(ProxyState.Funded)
        self._setState(ProxyState.Registered)

    @_vm.function(EVENT_VERIFY)
    def eventVerify(self, blockNum, blockData, proofNodes, receiptIndex, logIndex):
        '''
        Verify that the committed event was logged on chain, then release the reserved
        transaction and pay the service fee to the caller.  Steps:
        (1) verifyBlock: the block is inside the blockhash window and its digest matches blockData;
        (2) verifyProof: the Merkle proof ties the receipt to the header's receiptsRoot;
        (3) verifyLog:   the selected log entry equals the committed one.
        '''
        ctx = self.ctx
        self._requireState(ProxyState.Registered)
        if not isinstance(proofNodes, list) or not all(isinstance(n, bytes) for n in proofNodes) \
            or not isinstance(blockData, bytes):
            raise ProofInvalid('Malformed eventVerify arguments')
        ctx.useGas(ctx.schedule.perProofOctetVerified * (len(blockData) + sum(len(n) for n in proofNodes)),
            'proof verification')
        receiptsRoot = self._verifyBlock(_rlp.decodeUint(blockNum), blockData)
        try:
            receipt = _trie.verify(receiptsRoot, _rlp.decodeUint(receiptIndex), _trie.MerkleProof(proofNodes))
        except _trie.TrieError as ex:
            raise ProofInvalid('%s: %s' % (type(ex).__name__, ex))
        self._verifyLog(receipt, _rlp.decodeUint(logIndex))

        self._setState(ProxyState.Triggered)
        result = self.msgRelease()
        ctx.sendMessage(ctx.caller, self._fee())
        if ctx.balance > 0:   # overfunding, or et-ether kept by a failed release
            ctx.sendMessage(ctx.load(_OWNER), ctx.balance)
        ctx.emitLog([RELEASED_TOPIC], _rlp.encode(_rlp.encodeUint(int(result.success))))
        _log.info('proxy %s triggered by %s, release %s', ctx.address.hex(), ctx.caller.hex(),
            'succeeded' if result.success else 'failed: %s' % result.error)

    def _verifyBlock(self, blockNum, blockData):
        expected = self.ctx.blockhash(blockNum)
        if expected is None:
            raise BlockOutOfWindow('Block %i is outside the blockhash window of block %i' %
                (blockNum, self.ctx.blockNumber))
        if _trie.keccak256(blockData) != expected:
            raise BlockMismatch('Block data does not hash to the digest of block %i' % blockNum)
        try:
            header = _rlp.decodeList(blockData, 8)
        except _rlp.RlpError as ex:
            raise BlockMismatch('Block data is not a header: %s' % ex)
        receiptsRoot = header[_chain.RECEIPTS_ROOT_INDEX]
        if not isinstance(receiptsRoot, bytes) or len(receiptsRoot) != 32:
            raise BlockMismatch('Header item %i is not a digest' % _chain.RECEIPTS_ROOT_INDEX)
        return receiptsRoot

    def _verifyLog(self, receipt, logIndex):
        try:
            item = _rlp.decodeList(receipt, 4)
        except _rlp.RlpError as ex:
            raise LogMismatch('Proven value is not a receipt: %s' % ex)
        logs = item[_chain.RECEIPT_LOGS_INDEX]
        if not isinstance(logs, list) or not (0 <= logIndex < len(logs)):
            raise LogMismatch('Receipt has no log entry %i' % logIndex)
        entry = logs[logIndex]
        if not isinstance(entry, list) or len(entry) != 3 or entry[0] != self.ctx.load(_EMITTER):
            raise LogMismatch('Log entry %i was not emitted by the expected contract' % logIndex)
        if _trie.keccak256(_rlp.encode(entry)) != self.ctx.load(_COMMITMENT):
            raise LogMismatch('Log entry %i differs from the committed event' % logIndex)

    def msgRelease(self):
        '''send the reserved transaction as a message; a failing target does not revert the trigger'''
        reserved = self._reserved()
        if reserved.kind is _vm.TxKind.FundTransfer:
            return self.ctx.sendMessage(reserved.recipient, reserved.value, catchFailure=True)
        if reserved.kind is _vm.TxKind.FunctionInvocation:
            return self.ctx.sendMessage(reserved.recipient, reserved.value, reserved.payload, catchFailure=True)
        return self.ctx.sendMessage(None, 0, reserved.payload, catchFailure=True)

    @_vm.function(CLOSE)
    def close(self):
        self._requireOwner(self.ctx.caller)
        self._requireState(ProxyState.Funded, ProxyState.Registered)
        self.ctx.selfDestruct(self.ctx.caller)


@_vm.registerHandler(HUB_HANDLER)
class HubContract(_vm.Contract):
    '''registry of proxies; its NewService logs are what executors subscribe to'''
    @_vm.function(NEW_SERVICE)
    def newService(self, proxy):
        if len(proxy) != 20:
            raise _vm.HandlerFailure('newService expects a 20-octet proxy address')
        if self.ctx.load(proxy):
            raise AlreadyRegistered('Proxy %s is already registered' % proxy.hex())
        self.ctx.sendMessage(proxy, 0, _vm.encodeCall(REGISTER))
        self.ctx.store(proxy, b'\x01')
        self.ctx.emitLog([NEW_SERVICE_TOPIC], _rlp.encode(proxy))


@_vm.registerHandler(SOURCE_HANDLER)
class EventSource(_vm.Contract):
    '''a contract that logs whatever event it is asked to; stands for any application contract'''
    @_vm.function(EMIT_EVENT)
    def emitEvent(self, topics, data):
        self.ctx.emitLog(topics, data)


@_vm.registerHandler(TARGET_HANDLER)
class Target(_vm.Contract):
    '''release target for function invocations and contract creations'''
    @_vm.function(SET_SENTINEL)
    def setSentinel(self, value):
        self.ctx.store(SENTINEL_KEY, value)

    @_vm.function(FAIL)
    def fail(self):
        raise _vm.HandlerFailure('Target refuses the call')


### ------------------------------------------------
### client side: transactions of the protocol and the full-node view of a proxy

def deployProxyTx(owner, reserved, fee, expectedLog, gasLimit=DEFAULT_GAS_LIMIT):
    data = _vm.encodeCreation(PROXY_HANDLER,
        [reserved.check().toRlp(), _rlp.encodeUint(fee), expectedLog.toRlp()])
    return _vm.Transaction(owner, None, 0, data, gasLimit)

def deployHubTx(deployer, gasLimit=DEFAULT_GAS_LIMIT):
    return _vm.Transaction(deployer, None, 0, _vm.encodeCreation(HUB_HANDLER), gasLimit)

def chargeTx(owner, proxy, amount, gasLimit=DEFAULT_GAS_LIMIT):
    return _vm.Transaction(owner, proxy, amount, _vm.encodeCall(CHARGE), gasLimit)

def newServiceTx(owner, hub, proxy, gasLimit=DEFAULT_GAS_LIMIT):
    return _vm.Transaction(owner, hub, 0, _vm.encodeCall(NEW_SERVICE, [proxy]), gasLimit)

def eventVerifyTx(executor, proxy, bundle, gasLimit=DEFAULT_GAS_LIMIT):
    return _vm.Transaction(executor, proxy, 0, _vm.encodeCall(EVENT_VERIFY, bundle.toArgs()), gasLimit)

def closeTx(owner, proxy, gasLimit=DEFAULT_GAS_LIMIT):
    return _vm.Transaction(owner, proxy, 0, _vm.encodeCall(CLOSE), gasLimit)

def emitEventTx(sender, source, topics, data, gasLimit=DEFAULT_GAS_LIMIT):
    return _vm.Transaction(sender, source, 0, _vm.encodeCall(EMIT_EVENT, [list(topics), data]), gasLimit)


def proxyState(state, address):
    '''lifecycle state of the proxy at `address` in a WorldState (Closed once it self-destructed)'''
    account = state.get(address)
    if account is None or account.handler != PROXY_HANDLER:
        raise ValueError('No proxy contract at %s' % bytes(address).hex())
    if account.destroyed:
        return ProxyState.Closed
    return ProxyState(_rlp.decodeUint(account.storage[_STATE].lstrip(b'\x00')))


def readProxy(state, address):
    '''decode the whole storage of a proxy (full-node access)'''
    current = proxyState(state, address)
    account = state.get(address)
    storage = account.storage
    return ProxyStorage(
        owner             = storage[_OWNER],
        etData            = ReservedTransaction.fromRlp(_rlp.decode(storage[_ETDATA])),
        etEventCommitment = storage[_COMMITMENT],
        expectedEmitter   = storage[_EMITTER],
        serviceFee        = _rlp.decodeUint(storage.get(_FEE, b'')),
        state             = current,
        expectedLog       = _chain.LogEntry.fromRlp(_rlp.decode(storage[_EXPECTED])),
        balance           = account.balance)


def hubServices(state, hub):
    '''proxy addresses registered with the hub, in registration order'''
    return list(state.get(hub).storage.keys())
