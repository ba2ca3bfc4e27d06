#pragma once

// Everything except the command-line front end (flora/cli.hpp).

#include "flora/binary_io.hpp"
#include "flora/config.hpp"
#include "flora/dataset.hpp"
#include "flora/error.hpp"
#include "flora/eval.hpp"
#include "flora/gradcheck.hpp"
#include "flora/hamming_index.hpp"
#include "flora/hash_model.hpp"
#include "flora/matrix.hpp"
#include "flora/measures.hpp"
#include "flora/nn.hpp"
#include "flora/parallel.hpp"
#include "flora/sampler.hpp"
#include "flora/trainer.hpp"
