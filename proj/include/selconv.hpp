#pragma once

#include "selconv/aggregate.hpp"
#include "selconv/analysis.hpp"
#include "selconv/codebook.hpp"
#include "selconv/embed.hpp"
#include "selconv/error.hpp"
#include "selconv/manifest.hpp"
#include "selconv/masking.hpp"
#include "selconv/pipeline.hpp"
#include "selconv/postprocess.hpp"
#include "selconv/reduce.hpp"
#include "selconv/retrieval.hpp"
#include "selconv/synth.hpp"
#include "selconv/tensor.hpp"
