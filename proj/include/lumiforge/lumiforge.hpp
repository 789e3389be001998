#pragma once

#include "lumiforge/config.hpp"
#include "lumiforge/dataset.hpp"
#include "lumiforge/epi.hpp"
#include "lumiforge/error.hpp"
#include "lumiforge/eval.hpp"
#include "lumiforge/image.hpp"
#include "lumiforge/light_field.hpp"
#include "lumiforge/nn/checkpoint.hpp"
#include "lumiforge/nn/network.hpp"
#include "lumiforge/nn/trainer.hpp"
#include "lumiforge/optics.hpp"
#include "lumiforge/png_io.hpp"
#include "lumiforge/scene.hpp"
#include "lumiforge/sr.hpp"
