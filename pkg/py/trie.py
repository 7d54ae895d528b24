'''
Keccak-256 hashed hexary trie of transaction receipts, with Merkle proof generation and verification.
The key of receipt i is the RLP encoding of the integer i, split into 4-bit nibbles.
The trie has only two kinds of nodes:
  - Branch: 16 child digests (absent children are empty strings) and an optional value,
    encoded as an RLP list of 17 items;
  - Leaf: the unconsumed tail of the key and the value, encoded as an RLP list of 2 items,
    with the tail packed into octets after a nibble that gives its length parity.
There are no extension nodes: every nibble shared by two or more keys becomes a Branch level.
Nodes are always referred to by the digest of their encoding, never inlined.
A typical round trip looks like
>>> root, store = trie.buildReceiptTrie(encodedReceipts)
>>> proof = trie.prove(store, 2)
>>> trie.verify(root, 2, proof) == encodedReceipts[2]
True
'''
from Crypto.Hash import keccak as _keccak
from . import rlp as _rlp

class TrieError(ValueError):
    pass

class EmptyReceipts(TrieError):
    pass

class UnknownIndex(TrieError):
    pass

class RootMismatch(TrieError):
    pass

class LinkMismatch(TrieError):
    pass

class PathMismatch(TrieError):
    pass

class MalformedNode(TrieError):
    pass


def keccak256(data):
    '''Keccak-256 digest (original Keccak padding, as used by Ethereum, not the FIPS-202 SHA3-256)'''
    return _keccak.new(digest_bits=256, data=bytes(data)).digest()

# digest of the RLP empty list; used as the receipts root of blocks without transactions
EMPTY_LIST_DIGEST = keccak256(_rlp.encode([]))

ZERO_DIGEST = bytes(32)


def toNibbles(data):
    result = []
    for octet in data:
        result += [octet >> 4, octet & 15]
    return result


def packNibbles(nibbles):
    '''prefix the path with its length parity (plus a zero pad nibble if even) and pack into octets'''
    if len(nibbles) % 2:
        nibbles = [1] + list(nibbles)
    else:
        nibbles = [0, 0] + list(nibbles)
    return bytes(nibbles[i] * 16 + nibbles[i+1] for i in range(0, len(nibbles), 2))


def unpackNibbles(packed):
    nibbles = toNibbles(packed)
    if len(nibbles) == 0:
        raise MalformedNode('Packed leaf path is empty')
    if nibbles[0] == 1:
        return nibbles[1:]
    if nibbles[0] == 0 and nibbles[1] == 0:
        return nibbles[2:]
    raise MalformedNode('Invalid parity nibbles in packed leaf path: %x%x' % (nibbles[0], nibbles[1]))


def receiptKey(index):
    '''nibbles of the trie key for the receipt with the given position in the block'''
    return toNibbles(_rlp.encode(_rlp.encodeUint(index)))


class Branch(object):
    def __init__(self, children, value=b''):
        self.children = list(children)   # 16 digests or empty strings
        self.value    = value
    def encode(self):
        return _rlp.encode(self.children + [self.value])

class Leaf(object):
    def __init__(self, path, value):
        self.path  = list(path)
        self.value = value
    def encode(self):
        return _rlp.encode([packNibbles(self.path), self.value])


def decodeNode(encoded):
    '''parse a node encoding into a Branch or Leaf, checking its shape'''
    try:
        item = _rlp.decode(encoded)
    except _rlp.RlpError as ex:
        raise MalformedNode('Node is not valid RLP: %s' % ex)
    if not isinstance(item, list) or not all(isinstance(elem, bytes) for elem in item):
        raise MalformedNode('Node must be a flat list of byte strings')
    if len(item) == 17:
        children = item[:16]
        if any(len(child) not in (0, 32) for child in children):
            raise MalformedNode('Branch child reference must be a 32-octet digest or empty')
        if not any(children) and not item[16]:
            raise MalformedNode('Branch has neither children nor a value')
        return Branch(children, item[16])
    if len(item) == 2:
        return Leaf(unpackNibbles(item[0]), item[1])
    raise MalformedNode('Node has %i items, expected 17 (branch) or 2 (leaf)' % len(item))


class TrieStore(object):
    '''
    Immutable node store produced by buildReceiptTrie: maps node digests to node encodings,
    and remembers the root digest and the set of inserted indices.
    '''
    def __init__(self, root, nodes, count):
        self.root  = root
        self.nodes = nodes
        self.count = count
    def __len__(self):
        return len(self.nodes)
    def __repr__(self):
        return 'TrieStore(root=%s, %i receipts, %i nodes)' % (self.root.hex(), self.count, len(self.nodes))


class MerkleProof(object):
    '''ordered list of node encodings from the root node to the leaf'''
    def __init__(self, nodes):
        self.nodes = [bytes(node) for node in nodes]
    def __len__(self):
        return len(self.nodes)
    def __eq__(self, other):
        return isinstance(other, MerkleProof) and self.nodes == other.nodes
    def __repr__(self):
        return 'MerkleProof(%i nodes, %i octets)' % (len(self.nodes), sum(len(n) for n in self.nodes))
    def encode(self):
        return _rlp.encode(self.nodes)
    @staticmethod
    def decode(data):
        item = _rlp.decode(data)
        if not isinstance(item, list) or not all(isinstance(node, bytes) for node in item):
            raise MalformedNode('Proof must be a list of node encodings')
        return MerkleProof(item)


def _buildNode(items, depth, nodes):
    # items: list of (key nibbles, value) that share the first `depth` nibbles
    if len(items) == 1:
        key, value = items[0]
        node = Leaf(key[depth:], value)
    else:
        children = [b''] * 16
        value    = b''
        groups   = [[] for _ in range(16)]
        for key, val in items:
            if len(key) == depth:
                value = val
            else:
                groups[key[depth]].append((key, val))
        for nibble in range(16):
            if groups[nibble]:
                children[nibble] = _buildNode(groups[nibble], depth+1, nodes)
        node = Branch(children, value)
    encoded = node.encode()
    digest  = keccak256(encoded)
    nodes[digest] = encoded
    return digest


def buildReceiptTrie(receipts):
    '''
    Construct the receipt trie from a list of RLP-encoded receipts.
    Arguments:
      receipts:  non-empty list of receipt encodings, in block order.
    Returns:
      root digest and the TrieStore holding every node.
    '''
    if len(receipts) == 0:
        raise EmptyReceipts('Cannot build a receipt trie from an empty list')
    items = [(receiptKey(i), bytes(r)) for i, r in enumerate(receipts)]
    nodes = dict()
    root  = _buildNode(items, 0, nodes)
    return root, TrieStore(root, nodes, len(receipts))


def prove(store, index):
    '''collect the node encodings along the path of receipt `index`'''
    if not (0 <= index < store.count):
        raise UnknownIndex('Receipt index %i is not in the trie (%i receipts)' % (index, store.count))
    key   = receiptKey(index)
    depth = 0
    path  = []
    digest = store.root
    while True:
        encoded = store.nodes[digest]
        path.append(encoded)
        node = decodeNode(encoded)
        if isinstance(node, Leaf):
            if key[depth:] != node.path:
                raise UnknownIndex('Receipt index %i is not in the trie' % index)
            return MerkleProof(path)
        if depth >= len(key) or not node.children[key[depth]]:
            raise UnknownIndex('Receipt index %i is not in the trie' % index)
        digest = node.children[key[depth]]
        depth += 1


def verify(root, index, proof):
    '''
    Check a Merkle proof against a receipts root and return the proven receipt encoding.
    Verification walks the proof from the root: the first node must hash to the root,
    every Branch must hold the digest of the next node in one of its child slots,
    and the slots taken plus the Leaf path must spell the key of `index`.
    Raises RootMismatch, LinkMismatch, PathMismatch or MalformedNode (all TrieError);
    safe to call on arbitrary adversarial input.
    '''
    nodes = proof.nodes if isinstance(proof, MerkleProof) else list(proof)
    if not isinstance(index, int) or index < 0:
        raise PathMismatch('Receipt index must be a non-negative integer, got %r' % (index,))
    if len(nodes) == 0:
        raise MalformedNode('Proof contains no nodes')
    if keccak256(nodes[0]) != bytes(root):
        raise RootMismatch('First proof node does not hash to the receipts root')
    key = receiptKey(index)
    consumed = []
    for i, encoded in enumerate(nodes):
        node = decodeNode(encoded)
        if isinstance(node, Leaf):
            if i != len(nodes)-1:
                raise MalformedNode('Leaf node at position %i is followed by more nodes' % i)
            if consumed + node.path != key:
                raise PathMismatch('Proof path does not spell the key of receipt %i' % index)
            return node.value
        if i == len(nodes)-1:
            raise MalformedNode('Proof ends with a branch node instead of a leaf')
        digest = keccak256(nodes[i+1])
        slots  = [j for j in range(16) if node.children[j] == digest]
        if not slots:
            raise LinkMismatch('Node %i is not referenced by the branch above it' % (i+1))
        # identical subtrees may sit in several slots; prefer the one the key asks for
        position = len(consumed)
        if position < len(key) and key[position] in slots:
            consumed.append(key[position])
        else:
            consumed.append(slots[0])
