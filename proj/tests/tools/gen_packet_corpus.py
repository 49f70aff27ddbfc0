#!/usr/bin/env python3
"""Generate the packet test corpus and its expected-value oracle.

Builds IPv4/TCP and IPv4/UDP packets field by field with struct.pack,
computes checksums with an independent one's-complement implementation,
and emits:

  tests/fixtures/corpus_en10mb.pcap   - 100 frames, little-endian pcap, EN10MB
  tests/fixtures/corpus_expected.json - per-packet expected field values
  tests/fixtures/corpus_rawip_be.pcap - first 20 IP packets, big-endian pcap, RAW-IP
  tests/fixtures/handshake.pcap       - one complete TCP session (both directions)
  tests/fixtures/empty.pcap           - global header only

Deterministic: fixed seed, fixed timestamps. Re-running reproduces the
same bytes. The C++ parser is tested against these files; this script
must stay independent of the C++ code.
"""

import json
import random
import struct
from pathlib import Path

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

rng = random.Random(0x9A17C0DE)


def ones_complement_sum(data: bytes) -> int:
    if len(data) % 2:
        data += b"\x00"
    total = 0
    for i in range(0, len(data), 2):
        total += (data[i] << 8) | data[i + 1]
        total = (total & 0xFFFF) + (total >> 16)
    return total


def checksum(data: bytes) -> int:
    return (~ones_complement_sum(data)) & 0xFFFF


def build_ip(
    src,
    dst,
    proto,
    payload,
    ttl,
    ip_id,
    tos=0,
    df=False,
    mf=False,
    frag_off=0,
    options=b"",
    reserved_flag=False,
    corrupt_ip_csum=False,
):
    assert len(options) % 4 == 0 and len(options) <= 40
    ihl = 5 + len(options) // 4
    total_length = ihl * 4 + len(payload)
    flags = (0x8000 if reserved_flag else 0) | (0x4000 if df else 0) | (0x2000 if mf else 0)
    flags_frag = flags | frag_off
    hdr = struct.pack(
        ">BBHHHBBH4s4s",
        (4 << 4) | ihl,
        tos,
        total_length,
        ip_id,
        flags_frag,
        ttl,
        proto,
        0,
        src.to_bytes(4, "big"),
        dst.to_bytes(4, "big"),
    )
    hdr = hdr + options
    csum = checksum(hdr)
    if corrupt_ip_csum:
        csum ^= 0x0101
    hdr = hdr[:10] + struct.pack(">H", csum) + hdr[12:]
    return hdr + payload, csum


def l4_checksum(src, dst, proto, segment: bytes) -> int:
    pseudo = struct.pack(">4s4sBBH", src.to_bytes(4, "big"), dst.to_bytes(4, "big"), 0, proto, len(segment))
    return checksum(pseudo + segment)


def build_tcp(
    src,
    dst,
    sport,
    dport,
    seq,
    ack,
    flags,
    window,
    payload,
    options=b"",
    reserved=0,
    urgent=0,
    corrupt_csum=False,
):
    assert len(options) % 4 == 0 and len(options) <= 40
    offset = 5 + len(options) // 4
    hdr = struct.pack(">HHIIBBHHH", sport, dport, seq, ack, (offset << 4) | reserved, flags, window, 0, urgent)
    seg = hdr + options + payload
    csum = l4_checksum(src, dst, 6, seg)
    if csum == 0:
        csum = 0xFFFF
    if corrupt_csum:
        csum ^= 0x2020
    seg = seg[:16] + struct.pack(">H", csum) + seg[18:]
    return seg, csum


def build_udp(src, dst, sport, dport, payload, zero_csum=False):
    length = 8 + len(payload)
    hdr = struct.pack(">HHHH", sport, dport, length, 0)
    seg = hdr + payload
    if zero_csum:
        csum = 0
    else:
        csum = l4_checksum(src, dst, 17, seg)
        if csum == 0:
            csum = 0xFFFF
    seg = seg[:6] + struct.pack(">H", csum) + seg[8:]
    return seg, csum


def sack_option(blocks):
    body = b"".join(struct.pack(">II", l, r) for l, r in blocks)
    opt = bytes([1, 1, 5, 2 + len(body)]) + body  # NOP NOP SACK
    assert len(opt) % 4 == 0
    return opt


MSS_WS_TS = bytes([2, 4, 0x05, 0xB4, 1, 3, 3, 7, 8, 10, 0, 1, 2, 3, 4, 5, 6, 7, 1, 1])
MSS_ONLY = bytes([2, 4, 0x05, 0xB4])

TCP_FIN, TCP_SYN, TCP_RST, TCP_PSH, TCP_ACK, TCP_URG = 0x01, 0x02, 0x04, 0x08, 0x10, 0x20


def rand_ip():
    return rng.randrange(1, 0xE0000000)  # below multicast


def rand_payload(n):
    return bytes(rng.randrange(256) for _ in range(n))


packets = []  # (ip_bytes, expected dict)


def record(ip_bytes, exp):
    exp["index"] = len(packets)
    exp["ip_len"] = len(ip_bytes)
    packets.append((ip_bytes, exp))


def make_tcp_packet(
    with_options=None,
    sack_blocks=None,
    payload_len=None,
    mf=False,
    corrupt_ip=False,
    corrupt_l4=False,
    ip_options=b"",
    reserved_flag=False,
    reserved_nibble=0,
):
    src, dst = rand_ip(), rand_ip()
    sport, dport = rng.randrange(1, 65536), rng.randrange(1, 65536)
    seq, ack = rng.randrange(2**32), rng.randrange(2**32)
    flag_choices = [TCP_SYN, TCP_SYN | TCP_ACK, TCP_ACK, TCP_ACK | TCP_PSH, TCP_FIN | TCP_ACK, TCP_RST]
    flags = rng.choice(flag_choices)
    window = rng.randrange(65536)
    urgent = rng.randrange(65536) if flags & TCP_URG else 0
    ttl = rng.randrange(1, 256)
    ip_id = rng.randrange(65536)
    tos = rng.choice([0, 0, 0, 0x10, 0xB8])
    df = rng.random() < 0.5
    n = payload_len if payload_len is not None else rng.choice([0, 0, 4, 32, 600])
    payload = rand_payload(n)
    options = with_options or b""
    if sack_blocks:
        options = sack_option(sack_blocks)
        flags = TCP_ACK
    seg, l4sum = build_tcp(
        src, dst, sport, dport, seq, ack, flags, window, payload,
        options=options, reserved=reserved_nibble, corrupt_csum=corrupt_l4,
    )
    ip_bytes, ipsum = build_ip(
        src, dst, 6, seg, ttl, ip_id, tos=tos, df=df, mf=mf,
        options=ip_options, reserved_flag=reserved_flag, corrupt_ip_csum=corrupt_ip,
    )
    exp = {
        "protocol": "tcp",
        "src_ip": src,
        "dst_ip": dst,
        "ttl": ttl,
        "ip_id": ip_id,
        "tos": tos,
        "df": df,
        "mf": mf,
        "frag_offset": 0,
        "ip_reserved_flag": reserved_flag,
        "ip_options_len": len(ip_options),
        "ip_checksum": ipsum,
        "ip_checksum_valid": not corrupt_ip,
        "src_port": sport,
        "dst_port": dport,
        "tcp_seq": seq,
        "tcp_ack": ack,
        "tcp_flags": flags,
        "tcp_reserved": reserved_nibble,
        "tcp_window": window,
        "tcp_urgent": urgent,
        "tcp_options_len": len(options),
        "sack_blocks": [list(b) for b in (sack_blocks or [])],
        "l4_checksum": l4sum,
        "l4_check": "not_checkable" if mf else ("invalid" if corrupt_l4 else "valid"),
        "payload_len": n,
        "non_first_fragment": False,
    }
    record(ip_bytes, exp)


def make_udp_packet(zero_csum=False, payload_len=None, corrupt_ip=False):
    src, dst = rand_ip(), rand_ip()
    sport, dport = rng.randrange(1, 65536), rng.randrange(1, 65536)
    ttl = rng.randrange(1, 256)
    ip_id = rng.randrange(65536)
    n = payload_len if payload_len is not None else rng.choice([0, 8, 63, 512])
    payload = rand_payload(n)
    seg, l4sum = build_udp(src, dst, sport, dport, payload, zero_csum=zero_csum)
    ip_bytes, ipsum = build_ip(src, dst, 17, seg, ttl, ip_id, df=rng.random() < 0.5, corrupt_ip_csum=corrupt_ip)
    exp = {
        "protocol": "udp",
        "src_ip": src,
        "dst_ip": dst,
        "ttl": ttl,
        "ip_id": ip_id,
        "tos": 0,
        "df": None,
        "mf": False,
        "frag_offset": 0,
        "ip_reserved_flag": False,
        "ip_options_len": 0,
        "ip_checksum": ipsum,
        "ip_checksum_valid": not corrupt_ip,
        "src_port": sport,
        "dst_port": dport,
        "l4_checksum": l4sum,
        "l4_check": "not_checkable" if zero_csum else "valid",
        "payload_len": n,
        "non_first_fragment": False,
    }
    exp["df"] = bool(ip_bytes[6] & 0x40)
    record(ip_bytes, exp)


def make_nonfirst_fragment(proto):
    src, dst = rand_ip(), rand_ip()
    ttl = rng.randrange(1, 256)
    ip_id = rng.randrange(65536)
    frag_off = rng.randrange(1, 8192)
    mf = rng.random() < 0.5
    n = rng.choice([8, 24, 120])
    payload = rand_payload(n)
    ip_bytes, ipsum = build_ip(src, dst, proto, payload, ttl, ip_id, mf=mf, frag_off=frag_off)
    exp = {
        "protocol": "tcp" if proto == 6 else "udp",
        "src_ip": src,
        "dst_ip": dst,
        "ttl": ttl,
        "ip_id": ip_id,
        "tos": 0,
        "df": False,
        "mf": mf,
        "frag_offset": frag_off,
        "ip_reserved_flag": False,
        "ip_options_len": 0,
        "ip_checksum": ipsum,
        "ip_checksum_valid": True,
        "l4_check": "not_checkable",
        "payload_len": n,
        "non_first_fragment": True,
    }
    record(ip_bytes, exp)


# --- corpus composition: 100 packets -------------------------------------
for _ in range(38):
    make_tcp_packet()
for _ in range(8):
    make_tcp_packet(with_options=MSS_WS_TS)
for _ in range(4):
    make_tcp_packet(with_options=MSS_ONLY)
make_tcp_packet(sack_blocks=[(1000, 2000)])
make_tcp_packet(sack_blocks=[(1000, 2000), (3000, 4000)])
make_tcp_packet(sack_blocks=[(10, 20), (30, 40), (50, 60)])
make_tcp_packet(sack_blocks=[(2**32 - 10, 5), (100, 200), (300, 400), (500, 600)])
for _ in range(4):
    make_tcp_packet(sack_blocks=[(rng.randrange(2**32), rng.randrange(2**32))])
for _ in range(3):
    make_tcp_packet(ip_options=bytes([7, 7, 4, 0]) + b"\x00" * 4)  # record-route stub + pad
make_tcp_packet(ip_options=b"\x01" * 40)  # max options, all NOP
make_tcp_packet(reserved_nibble=0x1)      # NS bit survives round trip
make_tcp_packet(reserved_flag=True)
make_tcp_packet(mf=True, payload_len=64)  # first fragment of a larger segment
make_tcp_packet(mf=True, payload_len=16)
for _ in range(22):
    make_udp_packet()
for _ in range(3):
    make_udp_packet(zero_csum=True)
make_udp_packet(payload_len=0)
for _ in range(2):
    make_nonfirst_fragment(6)
for _ in range(2):
    make_nonfirst_fragment(17)
make_tcp_packet(corrupt_ip=True)
make_tcp_packet(corrupt_l4=True)
make_udp_packet(corrupt_ip=True)
make_tcp_packet(payload_len=1200)

assert len(packets) == 100, len(packets)


# --- pcap writers ----------------------------------------------------------
def pcap_global(byteorder, linktype, snaplen=65535):
    fmt = "<IHHiIII" if byteorder == "little" else ">IHHiIII"
    return struct.pack(fmt, 0xA1B2C3D4, 2, 4, 0, 0, snaplen, linktype)


def pcap_record(byteorder, ts_sec, ts_usec, data):
    fmt = "<IIII" if byteorder == "little" else ">IIII"
    return struct.pack(fmt, ts_sec, ts_usec, len(data), len(data)) + data


ETH_SRC = bytes.fromhex("0a0b0c0d0e0f")
ETH_DST = bytes.fromhex("020304050607")


def eth_frame(ip_bytes, pad_to=0):
    frame = ETH_DST + ETH_SRC + b"\x08\x00" + ip_bytes
    if pad_to and len(frame) < pad_to:
        frame += b"\x00" * (pad_to - len(frame))
    return frame


FIXTURES.mkdir(parents=True, exist_ok=True)

out = bytearray(pcap_global("little", 1))
expected = []
ts = 1_700_000_000
for i, (ip_bytes, exp) in enumerate(packets):
    pad_to = 60 if (i % 9 == 0) else 0
    frame = eth_frame(ip_bytes, pad_to=pad_to)
    exp["frame_pad"] = max(0, (pad_to or 0) - (14 + len(ip_bytes)))
    exp["ts_sec"] = ts + i
    exp["ts_usec"] = (i * 1337) % 1_000_000
    out += pcap_record("little", exp["ts_sec"], exp["ts_usec"], frame)
    expected.append(exp)
(FIXTURES / "corpus_en10mb.pcap").write_bytes(out)

out = bytearray(pcap_global("big", 101))
for i, (ip_bytes, exp) in enumerate(packets[:20]):
    out += pcap_record("big", exp["ts_sec"], exp["ts_usec"], ip_bytes)
(FIXTURES / "corpus_rawip_be.pcap").write_bytes(out)

(FIXTURES / "corpus_expected.json").write_text(json.dumps(expected, indent=1) + "\n")

(FIXTURES / "empty.pcap").write_bytes(pcap_global("little", 1))


# --- handshake fixture: one full TCP session, both directions --------------
C_IP, S_IP = 0x0A010203, 0xCB007105  # 10.1.2.3 / 203.0.113.5
C_PORT, S_PORT = 43210, 80
ISS_C, ISS_S = 1000, 77000
hs = []


def hs_tcp(src, dst, sport, dport, seq, ack, flags, payload=b"", ip_id=0, ttl=64, sack=None):
    opts = sack_option(sack) if sack else b""
    seg, _ = build_tcp(src, dst, sport, dport, seq, ack, flags, 64000, payload, options=opts)
    ip_bytes, _ = build_ip(src, dst, 6, seg, ttl, ip_id, df=True)
    hs.append(ip_bytes)


req = rand_payload(100)
resp = rand_payload(200)
hs_tcp(C_IP, S_IP, C_PORT, S_PORT, ISS_C, 0, TCP_SYN, ip_id=4321)
hs_tcp(S_IP, C_IP, S_PORT, C_PORT, ISS_S, ISS_C + 1, TCP_SYN | TCP_ACK, ip_id=9000, ttl=63)
hs_tcp(C_IP, S_IP, C_PORT, S_PORT, ISS_C + 1, ISS_S + 1, TCP_ACK, ip_id=4322)
hs_tcp(C_IP, S_IP, C_PORT, S_PORT, ISS_C + 1, ISS_S + 1, TCP_ACK | TCP_PSH, payload=req, ip_id=4323)
hs_tcp(S_IP, C_IP, S_PORT, C_PORT, ISS_S + 1, ISS_C + 101, TCP_ACK, ip_id=9001, ttl=63,
       sack=[(ISS_C + 1, ISS_C + 101)])
hs_tcp(S_IP, C_IP, S_PORT, C_PORT, ISS_S + 1, ISS_C + 101, TCP_ACK | TCP_PSH, payload=resp, ip_id=9002, ttl=63)
hs_tcp(C_IP, S_IP, C_PORT, S_PORT, ISS_C + 101, ISS_S + 201, TCP_ACK, ip_id=4324)
hs_tcp(C_IP, S_IP, C_PORT, S_PORT, ISS_C + 101, ISS_S + 201, TCP_FIN | TCP_ACK, ip_id=4325)
hs_tcp(S_IP, C_IP, S_PORT, C_PORT, ISS_S + 201, ISS_C + 102, TCP_FIN | TCP_ACK, ip_id=9003, ttl=63)
hs_tcp(C_IP, S_IP, C_PORT, S_PORT, ISS_C + 102, ISS_S + 202, TCP_ACK, ip_id=4326)

out = bytearray(pcap_global("little", 1))
for i, ip_bytes in enumerate(hs):
    out += pcap_record("little", 1_700_100_000 + i, i * 250, eth_frame(ip_bytes))
(FIXTURES / "handshake.pcap").write_bytes(out)

print(f"wrote {len(packets)} corpus packets, {len(hs)} handshake packets")
print("fixed 40-byte packet checksums (packet 0):",
      hex(expected[0]["ip_checksum"]), hex(expected[0]["l4_checksum"]))
