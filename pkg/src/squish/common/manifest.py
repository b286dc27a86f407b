from typing import Dict, Mapping


def format_manifest(entries: Mapping[str, object]) -> str:
    lines = []
    for k, v in entries.items():
        assert '\n' not in str(k) and '=' not in str(k), f'Invalid manifest key {k!r}'
        v = str(v)
        assert '\n' not in v, f'Manifest values must be single line ({k})'
        lines.append(f'{k}={v}')
    return '\n'.join(lines) + '\n'


def parse_manifest(text: str) -> Dict[str, str]:
    entries = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        k, sep, v = line.partition('=')
        if not sep:
            raise ValueError(f'Malformed manifest line: {line!r}')
        entries[k.strip()] = v.strip()
    return entries


def write_manifest(path, entries: Mapping[str, object]):
    with open(path, 'w') as f:
        f.write(format_manifest(entries))


def read_manifest(path) -> Dict[str, str]:
    with open(path, 'r') as f:
        return parse_manifest(f.read())
