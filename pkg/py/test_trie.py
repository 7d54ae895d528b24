#!/usr/bin/python

"""
Test the Keccak-256 digest and the receipt trie: every receipt of tries of various sizes
is proven and verified, small tries match their hand-built form, proof lengths follow the
branch levels, and random single-octet corruptions of the proofs are all rejected
"""
import numpy
# if the package has been installed to the globally known directory, just import it
try: import eventwarden
except ImportError:  # otherwise load it from the parent folder
    import sys, os, importlib
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    sys.path.append(os.path.dirname(root))
    try: eventwarden = importlib.import_module(os.path.basename(root))
    except ImportError as ex: sys.exit("\033[1;31mFAILED TO IMPORT EVENTWARDEN: %s\033[0m" % ex)
trie, rlp = eventwarden.trie, eventwarden.rlp

def makeReceipts(count, seed):
    rng = numpy.random.RandomState(seed)
    return [bytes(rng.randint(0, 256, size=rng.randint(1, 120)).astype(numpy.uint8)) + bytes([i % 256])
        for i in range(count)]

def test_keccak():
    assert trie.keccak256(b'').hex() == 'c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470'
    assert trie.keccak256(b'abc').hex() == '4e03657aea45a94fc7d47ba826c8d667c0d1e6e33a64a036ec44f58fa12d6c45'
    # digest of the empty RLP list, the receipts root of an empty block
    assert trie.EMPTY_LIST_DIGEST.hex() == '1dcc4de8dec75d7aab85b567b6ccd41ad312451b948a7413f0a142fd40d49347'

def test_nibbles():
    assert trie.receiptKey(0) == [8, 0]
    assert trie.receiptKey(1) == [0, 1]
    assert trie.receiptKey(128) == [8, 1, 8, 0]
    for path in [[], [3], [1, 2], [15, 0, 7]]:
        assert trie.unpackNibbles(trie.packNibbles(path)) == path

def test_roundtrip():
    for count in [1, 2, 16, 17, 200]:
        receipts = makeReceipts(count, count)
        root, store = trie.buildReceiptTrie(receipts)
        assert store.root == root and store.count == count
        for index in range(count):
            proof = trie.prove(store, index)
            assert trie.verify(root, index, proof) == receipts[index]
            assert trie.MerkleProof.decode(proof.encode()) == proof
        # the same receipts always give the same root
        assert trie.buildReceiptTrie(list(receipts))[0] == root

def test_mutations():
    rng = numpy.random.RandomState(42)
    for count in [1, 2, 16, 17, 200]:
        receipts = makeReceipts(count, count+1)
        root, store = trie.buildReceiptTrie(receipts)
        accepted = 0
        for _ in range(1000):
            index = rng.randint(0, count)
            nodes = list(trie.prove(store, index).nodes)
            which = rng.randint(0, len(nodes))
            node  = bytearray(nodes[which])
            pos   = rng.randint(0, len(node))
            node[pos] ^= rng.randint(1, 256)
            nodes[which] = bytes(node)
            try:
                trie.verify(root, index, trie.MerkleProof(nodes))
                accepted += 1
            except trie.TrieError: pass
        assert accepted == 0, count

def test_small_tries():
    receipts = makeReceipts(2, 9)
    # one receipt: the root is a single leaf holding the whole key of index 0
    root, store = trie.buildReceiptTrie(receipts[:1])
    assert trie.packNibbles([8, 0]) == b'\x00\x80'
    assert root == trie.keccak256(rlp.encode([trie.packNibbles([8, 0]), receipts[0]]))
    assert trie.prove(store, 0).nodes == [rlp.encode([b'\x00\x80', receipts[0]])]
    # two receipts: keys 80 and 01 split at the first nibble, into slots 8 and 0 of a branch
    leaf0 = rlp.encode([b'\x10', receipts[0]])
    leaf1 = rlp.encode([b'\x11', receipts[1]])
    children = [b''] * 16
    children[8] = trie.keccak256(leaf0)
    children[0] = trie.keccak256(leaf1)
    branch = rlp.encode(children + [b''])
    root, store = trie.buildReceiptTrie(receipts)
    assert root == trie.keccak256(branch)
    assert trie.prove(store, 0).nodes == [branch, leaf0]
    assert trie.prove(store, 1).nodes == [branch, leaf1]

def test_proof_length():
    receipts = makeReceipts(16, 3)
    root, store = trie.buildReceiptTrie(receipts)
    # index 0 sits alone under slot 8; indices 1..15 share a second branch under slot 0
    assert [len(trie.prove(store, i)) for i in range(16)] == [2] + [3] * 15
    for count in [16, 200]:
        root, store = trie.buildReceiptTrie(makeReceipts(count, count))
        for index in range(count):
            proof = trie.prove(store, index)
            branches = sum(isinstance(trie.decodeNode(node), trie.Branch) for node in proof.nodes)
            assert len(proof) == 1 + branches

def test_determinism():
    receipts = makeReceipts(40, 11)
    root, store = trie.buildReceiptTrie(receipts)
    again, other = trie.buildReceiptTrie([bytes(r) for r in receipts])
    assert again == root and other.nodes == store.nodes
    rng = numpy.random.RandomState(12)
    for _ in range(50):
        changed = list(receipts)
        index = rng.randint(0, len(receipts))
        octets = bytearray(changed[index])
        octets[rng.randint(0, len(octets))] ^= rng.randint(1, 256)
        changed[index] = bytes(octets)
        assert trie.buildReceiptTrie(changed)[0] != root

def test_typed_errors():
    receipts = makeReceipts(17, 5)
    root, store = trie.buildReceiptTrie(receipts)
    other_root, other_store = trie.buildReceiptTrie(makeReceipts(17, 6))
    proof = trie.prove(store, 3)
    cases = [
        (lambda: trie.buildReceiptTrie([]),                                  trie.EmptyReceipts),
        (lambda: trie.prove(store, 17),                                      trie.UnknownIndex),
        (lambda: trie.verify(other_root, 3, proof),                          trie.RootMismatch),
        (lambda: trie.verify(root, 5, proof),                                trie.PathMismatch),
        (lambda: trie.verify(root, -1, proof),                               trie.PathMismatch),
        (lambda: trie.verify(root, 3, trie.MerkleProof(proof.nodes[:1] +
            trie.prove(other_store, 3).nodes[1:])),                          trie.LinkMismatch),
        (lambda: trie.verify(root, 3, trie.MerkleProof(proof.nodes[:-1])),  trie.MalformedNode),
        (lambda: trie.verify(root, 3, trie.MerkleProof([])),                 trie.MalformedNode),
        (lambda: trie.decodeNode(bytes.fromhex('c3010203')),                 trie.MalformedNode),
    ]
    for case, error in cases:
        try:
            case()
            assert False, error.__name__
        except error: pass

if __name__ == '__main__':
    ok = True
    for name, test in list(globals().items()):
        if name.startswith('test_') and callable(test):
            try:
                test()
                print('%s: OK' % name)
            except Exception as ex:
                print('%s: FAILED %s %s' % (name, type(ex).__name__, ex))
                ok = False
    if ok:
        print("\033[1;32mALL TESTS PASSED\033[0m")
    else:
        print("\033[1;31mSOME TESTS FAILED\033[0m")
