import hashlib
import os


def calculate_sha256(file_bytes):
    """Calcula o hash SHA-256 de um arquivo"""
    return hashlib.sha256(file_bytes).hexdigest()


def file_sha256(path):
    with open(path, 'rb') as f:
        return calculate_sha256(f.read())


def hash_directory(directory, names):
    """Hashes dos arquivos listados, relativos ao diretório (entrada do manifesto)"""
    return {name: file_sha256(os.path.join(directory, name)) for name in sorted(names)}
