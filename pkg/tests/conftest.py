import os

import numpy as np
import pytest

from polyaug.lexicon import Lexicon, Syllable, load_lexicon

S = Syllable.parse

# small hand-made lexicon around the 烤鸭 sentence; 超/抄 and 低/底 are homophones
CHAR_TABLE = """\
# char<TAB>syllables
昨\tzuo2
天\ttian1
前\tqian2
门\tmen2
商\tshang1
铺\tpu4,pu1
打\tda3,da2
出\tchu1
超\tchao1
抄\tchao1
低\tdi1
底\tdi3,de5
的\tde5,di4,di2
价\tjia4,jie5
烤\tkao3
鸭\tya1
招\tzhao1
牌\tpai2
重\tzhong4,chong2
要\tyao4,yao1
地\tdi4,de5
滴\tdi1
"""

WORD_TABLE = """\
昨天\tt\tzuo2 tian1
前门\tns\tqian2 men2
商铺\tn\tshang1 pu4
打出\tv\tda3 chu1
超低价\tn\tchao1 di1 jia4
抄底\tv\tchao1 di3
烤鸭\tn\tkao3 ya1
招牌\tn\tzhao1 pai2
重要\ta\tzhong4 yao4
"""

SENTENCE = "昨天前门商铺打出超低价烤鸭招牌"


@pytest.fixture(scope="session")
def lexicon_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("lex")
    c = d / "chars.tsv"
    w = d / "words.tsv"
    c.write_text(CHAR_TABLE, encoding="utf-8")
    w.write_text(WORD_TABLE, encoding="utf-8")
    return c, w


@pytest.fixture(scope="session")
def lex(lexicon_files):
    return load_lexicon(*lexicon_files)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def toy_lexicon(n_poly=3, n_mono=5, prons=2) -> Lexicon:
    """Generated lexicon: every syllable is distinct, characters from the CJK block."""
    char_pron = {}
    k = 0
    for i in range(n_poly):
        char_pron[chr(0x4E00 + i)] = tuple(Syllable("x" + "a" * (k + j + 1), 1) for j in range(prons))
        k += prons
    for i in range(n_mono):
        char_pron[chr(0x4E00 + n_poly + i)] = (Syllable("m" + "a" * (i + 1), 2),)
    return Lexicon(char_pron)


def pytest_report_header(config):
    from polyaug import BACKEND
    return f"polyaug kernel backend: {BACKEND} (POLYAUG_PURE_PYTHON={os.environ.get('POLYAUG_PURE_PYTHON', '')})"


# pass/fail lines collected by the acceptance suite, echoed after the run
CRITERIA: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[n])
