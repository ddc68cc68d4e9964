from .images import ImageSet, read_pnm, write_pnm
from .openml import fetch_openml
from .tabular import (Column, Dataset, dummy_encode, minmax_scale, parse_arff, parse_csv, prepare,
                      split, write_arff, write_csv)
