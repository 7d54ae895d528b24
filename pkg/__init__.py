from .py.rlp    import RlpError, MalformedRlp, NonCanonical
from .py.trie   import keccak256, buildReceiptTrie, prove, verify, MerkleProof, TrieError
from .py.chain  import Chain, ChainView, Block, BlockHeader, Receipt, LogEntry, ChainError, UnknownBlock
from .py.vm     import VM, GasSchedule, Transaction, TxKind, classify, deriveAddress, VMError
from .py.warden import ProxyState, ReservedTransaction, ProofBundle, readProxy, WardenError
from .py.agents import readScenario, runScenario, buildProofBundle, scanBlockForMatches, \
    ScenarioConfig, ScenarioReport, ExecutorAgent, AgentError
from .py.cli    import run, emitReport, parseReport, ParseError
from .py import rlp, trie, chain, vm, warden, agents, cli   # also import the submodules themselves
__version__ = '1.0'
__doc__ = '''
EventWarden: a deterministic blockchain simulator for event-driven transactions.
A proxy contract holds a reserved transaction and releases it when anybody proves,
with a Merkle proof of a transaction receipt, that a prescribed event has been logged on chain.
Submodules: rlp (serialization), trie (receipt trie and proofs), chain (blocks and receipts),
vm (accounts, transactions, messages, gas), warden (proxy and hub contracts),
agents (scenario driver and executors), cli (command-line program and reports).
'''
