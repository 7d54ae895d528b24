'''
Blocks, headers, receipts and logs, and the canonical chain that the simulation driver appends to.
There is no consensus: every call to Chain.appendBlock executes the given transactions in order
and seals the next block deterministically.  The header keeps the field order of an Ethereum header
up to the receipts root, so that receiptsRoot is item 5 of the encoded header:
  [parentDigest, ommers(0), coinbase(0), stateRoot(0), txRoot(0), receiptsRoot, number, timestamp]
where the zero fields are constant placeholders.
'''
import logging as _logging
from dataclasses import dataclass as _dataclass, field as _field
from . import rlp as _rlp, trie as _trie, vm as _vm

_log = _logging.getLogger(__name__)

RECEIPTS_ROOT_INDEX = 5
RECEIPT_LOGS_INDEX  = 3
BLOOM_SIZE = 256

class ChainError(LookupError):
    pass

class UnknownBlock(ChainError):
    pass


@_dataclass
class LogEntry:
    emitter: bytes
    topics:  list
    data:    bytes = b''

    def toRlp(self):
        return [self.emitter, list(self.topics), self.data]

    def encode(self):
        return _rlp.encode(self.toRlp())

    def digest(self):
        return _trie.keccak256(self.encode())

    @staticmethod
    def fromRlp(item):
        if not isinstance(item, list) or len(item) != 3 or not isinstance(item[0], bytes) \
            or not isinstance(item[1], list) or not isinstance(item[2], bytes):
            raise _rlp.MalformedRlp('Log entry must be [emitter, [topics], data]')
        if len(item[0]) != 20 or any(not isinstance(t, bytes) or len(t) != 32 for t in item[1]):
            raise _rlp.MalformedRlp('Log entry has a malformed emitter or topic')
        return LogEntry(item[0], item[1], item[2])


@_dataclass
class Receipt:
    status:            int
    cumulativeGasUsed: int
    logs:              list = _field(default_factory=list)
    # the attributes below are bookkeeping of the simulator and are not encoded
    gasUsed:           int = 0
    contractAddress:   object = None
    kind:              object = None
    error:             object = None

    @property
    def errorName(self):
        '''class name of the exception that failed the transaction, or None'''
        return self.error.split(':')[0] if self.error else None

    def toRlp(self):
        return [_rlp.encodeUint(self.status), _rlp.encodeUint(self.cumulativeGasUsed),
            bytes(BLOOM_SIZE), [log.toRlp() for log in self.logs]]

    def encode(self):
        return _rlp.encode(self.toRlp())

    @staticmethod
    def fromRlp(item):
        if not isinstance(item, list) or len(item) != 4 or not isinstance(item[RECEIPT_LOGS_INDEX], list):
            raise _rlp.MalformedRlp('Receipt must be [status, cumulativeGasUsed, bloom, [logs]]')
        return Receipt(_rlp.decodeUint(item[0]), _rlp.decodeUint(item[1]),
            [LogEntry.fromRlp(log) for log in item[RECEIPT_LOGS_INDEX]])


@_dataclass
class BlockHeader:
    parentDigest: bytes
    receiptsRoot: bytes
    number:       int
    timestamp:    int

    def toRlp(self):
        return [self.parentDigest, _trie.ZERO_DIGEST, bytes(20), _trie.ZERO_DIGEST, _trie.ZERO_DIGEST,
            self.receiptsRoot, _rlp.encodeUint(self.number), _rlp.encodeUint(self.timestamp)]

    def encode(self):
        return _rlp.encode(self.toRlp())

    def digest(self):
        return _trie.keccak256(self.encode())

    @staticmethod
    def fromRlp(item):
        if not isinstance(item, list) or len(item) != 8:
            raise _rlp.MalformedRlp('Block header must be a list of 8 items')
        return BlockHeader(item[0], item[RECEIPTS_ROOT_INDEX], _rlp.decodeUint(item[6]), _rlp.decodeUint(item[7]))


@_dataclass
class Block:
    header:       BlockHeader
    transactions: list = _field(default_factory=list)
    receipts:     list = _field(default_factory=list)

    @property
    def number(self):
        return self.header.number

    def encodedReceipts(self):
        return [receipt.encode() for receipt in self.receipts]

    def encode(self):
        return _rlp.encode([self.header.toRlp(), [tx.toRlp() for tx in self.transactions],
            [receipt.toRlp() for receipt in self.receipts]])

    @staticmethod
    def decode(data):
        item = _rlp.decodeList(data, 3)
        return Block(BlockHeader.fromRlp(item[0]),
            [_vm.Transaction.fromRlp(tx) for tx in item[1]],
            [Receipt.fromRlp(receipt) for receipt in item[2]])


def receiptsRootOf(encodedReceipts):
    '''root of the receipt trie, or the fixed sentinel for a block without receipts'''
    if len(encodedReceipts) == 0:
        return _trie.EMPTY_LIST_DIGEST, None
    return _trie.buildReceiptTrie(encodedReceipts)


class Chain(object):
    '''
    The canonical chain together with the world state it has produced.
    Arguments:
      alloc:     dict of address => initial balance of externally owned accounts (genesis allocation);
      window:    number of recent blocks whose header digest is visible to contracts (default 256);
      interval:  simulated seconds between consecutive blocks (default 15);
      schedule:  GasSchedule used by the virtual machine (default values if omitted);
      timestamp: timestamp of the genesis block.
    '''
    def __init__(self, alloc=None, window=256, interval=15, schedule=None, timestamp=0):
        if window <= 0:
            raise ValueError('Blockhash window must be positive')
        self.window   = window
        self.interval = interval
        self.vm       = _vm.VM(schedule, blockhash=self.blockhash)
        for address, balance in (alloc or {}).items():
            self.vm.state.getOrCreate(_vm.toAddress(address)).balance += balance
        genesis = Block(BlockHeader(_trie.ZERO_DIGEST, _trie.EMPTY_LIST_DIGEST, 0, timestamp))
        self.blocks   = [genesis]
        self.digests  = [genesis.header.digest()]
        self.stores   = [None]
        self.rejected = []   # (block number, transaction, exception) left out of blocks

    @property
    def state(self):
        return self.vm.state

    @property
    def schedule(self):
        return self.vm.schedule

    def head(self):
        return self.blocks[-1]

    def getBlock(self, number):
        if not (0 <= number < len(self.blocks)):
            raise UnknownBlock('Block %i does not exist (head is %i)' % (number, len(self.blocks)-1))
        return self.blocks[number]

    def receiptStore(self, number):
        '''trie node store of the block (None for blocks without receipts)'''
        self.getBlock(number)
        return self.stores[number]

    def blockhash(self, number, current=None):
        '''
        Header digest of block `number` as seen from block `current`
        (by default the block that would be appended next):
        defined only for current - window <= number < current, otherwise None.
        '''
        if current is None:
            current = len(self.blocks)
        if not (current - self.window <= number < current) or number >= len(self.blocks) or number < 0:
            return None
        return self.digests[number]

    def appendBlock(self, transactions=()):
        '''
        Execute the transactions in order on top of the head and seal the resulting block.
        Transactions refused before execution are left out and recorded in `rejected`;
        failing ones are included with a status-0 receipt.
        '''
        parent = self.head().header
        number = parent.number + 1
        self.vm.beginBlock(number, parent.timestamp + self.interval)
        included = []
        receipts = []
        for tx in transactions:
            try:
                receipt = self.vm.executeTransaction(tx)
            except _vm.TransactionRejected as ex:
                _log.info('block %i: rejected transaction from %s: %s', number, tx.sender.hex(), ex)
                self.rejected.append((number, tx, ex))
                continue
            included.append(tx)
            receipts.append(receipt)
        root, store = receiptsRootOf([receipt.encode() for receipt in receipts])
        block = Block(BlockHeader(self.digests[-1], root, number, parent.timestamp + self.interval),
            included, receipts)
        self.blocks.append(block)
        self.digests.append(block.header.digest())
        self.stores.append(store)
        _log.debug('block %i: %i transactions, %i rejected, receipts root %s',
            number, len(included), len(transactions) - len(included), root.hex())
        return block

    def dryRun(self, tx):
        '''
        Execute a transaction as if it were the first one of the next block, then discard
        every effect; returns the would-be receipt.  Pre-execution refusals are raised.
        '''
        snap   = self.vm.state.snapshot()
        ntrace = len(self.vm.trace)
        head   = self.head().header
        self.vm.beginBlock(head.number+1, head.timestamp + self.interval)
        try:
            return self.vm.executeTransaction(tx)
        finally:
            self.vm.state.restore(snap)
            del self.vm.trace[ntrace:]


class ChainView(object):
    '''
    Read-only access to a chain as an agent sees it while preparing a transaction
    for inclusion in block `current`.
    '''
    def __init__(self, chain, current=None):
        self.chain   = chain
        self.current = len(chain.blocks) if current is None else current
        self.window  = chain.window

    def getBlock(self, number):
        return self.chain.getBlock(number)

    def receiptStore(self, number):
        return self.chain.receiptStore(number)

    def blockhash(self, number):
        return self.chain.blockhash(number, self.current)
