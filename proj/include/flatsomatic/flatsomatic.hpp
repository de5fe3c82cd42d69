#pragma once

#include "flatsomatic/classify.hpp"
#include "flatsomatic/cluster.hpp"
#include "flatsomatic/crossval.hpp"
#include "flatsomatic/data.hpp"
#include "flatsomatic/data_io.hpp"
#include "flatsomatic/embed_io.hpp"
#include "flatsomatic/errors.hpp"
#include "flatsomatic/gradcheck.hpp"
#include "flatsomatic/io_util.hpp"
#include "flatsomatic/linalg.hpp"
#include "flatsomatic/manifest.hpp"
#include "flatsomatic/metrics.hpp"
#include "flatsomatic/nn.hpp"
#include "flatsomatic/pca.hpp"
#include "flatsomatic/random.hpp"
#include "flatsomatic/synth.hpp"
#include "flatsomatic/vae.hpp"
#include "flatsomatic/vae_io.hpp"
