'''
Recursive Length Prefix codec, the wire form of everything that gets hashed in the simulator:
block headers, receipts, logs, trie nodes, call data and proofs.
An item is either a byte string (`bytes`) or a list of items (`list`), nested arbitrarily:
>>> from eventwarden import rlp
>>> rlp.encode([b'cat', b'dog']).hex()
'c88363617483646f67'
>>> rlp.decode(bytes.fromhex('c88363617483646f67'))
[b'cat', b'dog']
Decoding is strict: any encoding that is not the unique canonical one is rejected.
'''

class RlpError(ValueError):
    '''base class for all decoding problems'''
    pass

class MalformedRlp(RlpError):
    pass

class NonCanonical(RlpError):
    pass


def _encodeLength(length, offset):
    if length < 56:
        return bytes([offset + length])
    lenbytes = length.to_bytes((length.bit_length() + 7) // 8, 'big')
    return bytes([offset + 55 + len(lenbytes)]) + lenbytes


def encode(item):
    '''
    Encode an item (bytes or a possibly nested list of them) into its canonical RLP form.
    bytearray and memoryview are accepted as byte strings, tuples as lists.
    '''
    if isinstance(item, (bytes, bytearray, memoryview)):
        item = bytes(item)
        if len(item) == 1 and item[0] < 0x80:
            return item
        return _encodeLength(len(item), 0x80) + item
    if isinstance(item, (list, tuple)):
        payload = b''.join(encode(elem) for elem in item)
        return _encodeLength(len(payload), 0xc0) + payload
    raise TypeError('Cannot RLP-encode an object of type %s' % type(item).__name__)


def _readLength(data, pos, lenlen):
    # long form: the length itself is a big-endian number of lenlen octets without leading zeros
    if pos + 1 + lenlen > len(data):
        raise MalformedRlp('Length prefix at offset %i runs past the end of input' % pos)
    lenbytes = data[pos+1 : pos+1+lenlen]
    if lenbytes[0] == 0:
        raise NonCanonical('Length at offset %i has a leading zero octet' % pos)
    length = int.from_bytes(lenbytes, 'big')
    if length < 56:
        raise NonCanonical('Length %i at offset %i should use the short form' % (length, pos))
    return length


def _decodeAt(data, pos):
    '''decode one item starting at `pos`, return (item, position after it)'''
    if pos >= len(data):
        raise MalformedRlp('Unexpected end of input at offset %i' % pos)
    prefix = data[pos]
    if prefix < 0x80:
        return data[pos:pos+1], pos+1
    if prefix < 0xb8:
        length = prefix - 0x80
        start  = pos+1
    elif prefix < 0xc0:
        length = _readLength(data, pos, prefix - 0xb7)
        start  = pos+1 + prefix - 0xb7
    elif prefix < 0xf8:
        length = prefix - 0xc0
        start  = pos+1
    else:
        length = _readLength(data, pos, prefix - 0xf7)
        start  = pos+1 + prefix - 0xf7
    end = start + length
    if end > len(data):
        raise MalformedRlp('Item at offset %i declares %i octets but only %i remain' %
            (pos, length, len(data) - start))
    if prefix < 0xc0:
        if length == 1 and data[start] < 0x80:
            raise NonCanonical('Single octet 0x%02x at offset %i must encode as itself' % (data[start], pos))
        return data[start:end], end
    result = []
    while start < end:
        elem, start = _decodeAt(data, start)
        result.append(elem)
    if start != end:
        raise MalformedRlp('List elements at offset %i overrun the declared payload' % pos)
    return result, end


def decode(data):
    '''
    Decode a complete RLP encoding; the whole input must be consumed.
    Raises MalformedRlp for truncated or overlong input and NonCanonical for
    encodings that a canonical encoder would never produce.
    '''
    data = bytes(data)
    item, end = _decodeAt(data, 0)
    if end != len(data):
        raise MalformedRlp('%i trailing octets after the encoded item' % (len(data) - end))
    return item


def encodeUint(value):
    '''big-endian minimal byte string of a non-negative integer; zero is the empty string'''
    if value < 0:
        raise ValueError('Negative integers have no RLP representation')
    return value.to_bytes((value.bit_length() + 7) // 8, 'big')


def decodeUint(data):
    if isinstance(data, list):
        raise MalformedRlp('Expected an integer, got a list')
    if len(data) > 0 and data[0] == 0:
        raise NonCanonical('Integer encoding has a leading zero octet')
    return int.from_bytes(data, 'big')


def decodeList(data, length=None):
    '''decode an encoding that must be a list (optionally of the given length)'''
    item = decode(data)
    if not isinstance(item, list):
        raise MalformedRlp('Expected a list, got a byte string')
    if length is not None and len(item) != length:
        raise MalformedRlp('Expected a list of %i items, got %i' % (length, len(item)))
    return item
