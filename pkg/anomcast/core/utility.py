import os
import tempfile

# %%


class Parameters:
    def __repr__(self):
        return str(self.__dict__)


# %%
def get_dir(file):
    """ Get directory of the input file """
    return os.path.dirname(os.path.realpath(file))


def data_path(name):
    """ Path of a file bundled in ``anomcast/data`` """
    return os.path.join(get_dir(__file__), "..", "data", name)


# %%
def atomic_write(path, text, mode="w"):
    """ Writes ``text`` to ``path`` through a temporary file in the same directory
    followed by a rename, so readers never observe a partial file.

    Args:
        path (str or os.PathLike): destination file
        text (str or bytes): content
        mode (str): "w" for text, "wb" for bytes
    """
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        kwargs = {} if "b" in mode else {"encoding": "utf-8", "newline": ""}
        with os.fdopen(fd, mode, **kwargs) as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


# %%


class _options:
    """Closed set of string options with ``check`` and ``default`` helpers."""

    values = ()
    fallback = None
    label = "option"

    @classmethod
    def check(cls, value):
        if value is not None:
            assert value in cls.values, "Unknown {0} '{1}', choose between {2}".format(
                cls.label, value, ", ".join(cls.values)
            )

    @classmethod
    def default(cls, value=None):
        if value is not None:
            return value
        else:
            return cls.fallback


class scales(_options):
    universal = "universal"
    industry = "industry"
    single = "single"
    values = (universal, industry, single)
    fallback = universal
    label = "scale"

    @classmethod
    def expand(cls, value):
        """ Expands the CLI value ``all`` into every scale """
        if value in (None, "all"):
            return list(cls.values)
        cls.check(value)
        return [value]


class model_classes(_options):
    sarimax = "sarimax"
    lstm = "lstm"
    values = (sarimax, lstm)
    fallback = lstm
    label = "model class"

    @classmethod
    def expand(cls, value):
        if value in (None, "both"):
            return list(cls.values)
        cls.check(value)
        return [value]


class exog_policies(_options):
    zero = "zero"
    hold_last = "hold-last"
    oracle = "oracle"
    values = (zero, hold_last, oracle)
    fallback = hold_last
    label = "exogenous policy"


class backends(_options):
    numpy = "numpy"
    pytorch = "pytorch"
    values = (numpy, pytorch)
    fallback = numpy
    label = "backend"
