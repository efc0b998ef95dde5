#pragma once

#include "vitalcast/analysis.hpp"
#include "vitalcast/config.hpp"
#include "vitalcast/csv.hpp"
#include "vitalcast/emotion.hpp"
#include "vitalcast/error.hpp"
#include "vitalcast/glyphs.hpp"
#include "vitalcast/image.hpp"
#include "vitalcast/image_io.hpp"
#include "vitalcast/ocr.hpp"
#include "vitalcast/parallel.hpp"
#include "vitalcast/pipeline.hpp"
#include "vitalcast/series.hpp"
#include "vitalcast/subprocess.hpp"
#include "vitalcast/synth.hpp"
#include "vitalcast/video_prep.hpp"
