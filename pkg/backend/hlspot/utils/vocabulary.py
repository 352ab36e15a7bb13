import numpy as np

from hlspot.errors import ContractError


class Vocabulary:
    """Charset + classe vazia (índice V-1) para os M slots de caracteres"""

    def __init__(self, charset):
        if len(set(charset)) != len(charset):
            raise ContractError("Charset com caracteres repetidos")
        self.charset = charset
        self.index = {c: i for i, c in enumerate(charset)}

    @property
    def size(self):
        return len(self.charset) + 1

    @property
    def empty(self):
        return len(self.charset)

    def normalize(self, text):
        # atlas de glifos é maiúsculo no preset desk
        upper = text.upper()
        return upper if all(c in self.index for c in upper) else text

    def supports(self, text):
        return all(c in self.index for c in self.normalize(text))

    def encode(self, text, max_len):
        text = self.normalize(text)
        if len(text) > max_len:
            raise ContractError(f"Transcrição com {len(text)} caracteres excede M={max_len}")
        labels = np.full(max_len, self.empty, dtype=np.int64)
        for k, c in enumerate(text):
            if c not in self.index:
                raise ContractError(f"Caractere fora do vocabulário: {c!r}")
            labels[k] = self.index[c]
        return labels

    def decode(self, labels):
        """Argmax por slot; slots da classe vazia são descartados"""
        return ''.join(self.charset[int(i)] for i in labels if int(i) != self.empty)
