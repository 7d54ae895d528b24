#!/usr/bin/python

"""
Test the RLP codec: known encodings, roundtrip of random nested items,
and rejection of truncated, overlong and non-canonical encodings
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
rlp = eventwarden.rlp

def test_known_encodings():
    lorem = b'Lorem ipsum dolor sit amet, consectetur adipisicing elit'
    vectors = [
        (b'dog', '83646f67'),
        ([b'cat', b'dog'], 'c88363617483646f67'),
        (b'', '80'),
        ([], 'c0'),
        (b'\x00', '00'),
        (b'\x0f', '0f'),
        (b'\x04\x00', '820400'),
        ([[], [[]], [[], [[]]]], 'c7c0c1c0c3c0c1c0'),
        (lorem, 'b838' + lorem.hex()),
    ]
    for item, hexstr in vectors:
        assert rlp.encode(item).hex() == hexstr, item
        assert rlp.decode(bytes.fromhex(hexstr)) == item

def test_integers():
    assert rlp.encodeUint(0) == b''
    assert rlp.encodeUint(15) == b'\x0f'
    assert rlp.encodeUint(1024) == b'\x04\x00'
    assert rlp.decodeUint(b'\x04\x00') == 1024
    assert rlp.decodeUint(b'') == 0
    for bad, error in [(b'\x00\x01', rlp.NonCanonical), ([b'\x01'], rlp.MalformedRlp)]:
        try:
            rlp.decodeUint(bad)
            assert False, bad
        except error: pass

def randomItem(rng, depth):
    if depth >= 8 or rng.randint(0, 3) > 0:
        kind = rng.randint(0, 4)   # short strings, single octets, empty and long strings
        if kind == 0:   length = rng.randint(0, 56)
        elif kind == 1: length = 1
        elif kind == 2: length = 0
        else:           length = rng.randint(56, 300)
        return bytes(rng.randint(0, 256, size=length).astype(numpy.uint8))
    return [randomItem(rng, depth+1) for _ in range(rng.randint(0, 5))]

def test_random_roundtrip():
    rng = numpy.random.RandomState(1)
    for _ in range(10000):
        item = randomItem(rng, 0)
        encoded = rlp.encode(item)
        assert rlp.decode(encoded) == item
        assert rlp.encode(rlp.decode(encoded)) == encoded

def test_non_canonical():
    fixtures = [
        '8100',                          # single octet below 0x80 must encode as itself
        'b803646f67',                    # long form for a 3-octet string
        'b90038' + '61' * 56,            # length with a leading zero octet
        'f80201' + '02',                 # long form for a 2-octet list
    ]
    for hexstr in fixtures:
        try:
            rlp.decode(bytes.fromhex(hexstr))
            assert False, hexstr
        except rlp.NonCanonical: pass

def test_malformed():
    fixtures = [
        '',                # empty input
        '83646f',          # string shorter than declared
        'c88363617483646f',# list shorter than declared
        '0102',            # trailing octet
        'b9',              # length prefix runs past the end
        'c2820102',        # list element overruns the list payload
    ]
    for hexstr in fixtures:
        try:
            rlp.decode(bytes.fromhex(hexstr))
            assert False, hexstr
        except rlp.MalformedRlp: pass
    try:
        rlp.encode(5)
        assert False
    except TypeError: pass

def test_decode_list():
    assert rlp.decodeList(rlp.encode([b'a', b'b']), 2) == [b'a', b'b']
    for data, length in [(rlp.encode(b'ab'), None), (rlp.encode([b'a']), 2)]:
        try:
            rlp.decodeList(data, length)
            assert False
        except rlp.MalformedRlp: pass

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
