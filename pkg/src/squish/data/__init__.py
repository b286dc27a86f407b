from .cifar import load_cifar10_binary, load_cifar10_dir
from .dataset import Dataset, SPLIT_IDS, hash_splits, load_dataset, require_nonempty, save_dataset
from .shapes import ShapesSpec, gen_shapes, render_shape, NUM_CLASSES as SHAPES_NUM_CLASSES
from .tensorfile import decode_tensorfile, encode_tensorfile, load_tensorfile, save_tensorfile
from .config import DataCfg
