// SPDX-License-Identifier: Apache-2.0
#include <pybind11/pybind11.h>
PYBIND11_MODULE(ogs, m) { m.doc() = "octant gaussian splatting"; }
