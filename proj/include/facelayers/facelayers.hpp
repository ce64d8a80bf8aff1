#pragma once

#include "facelayers/adam.hpp"
#include "facelayers/asset_io.hpp"
#include "facelayers/binary_io.hpp"
#include "facelayers/coarse_fit.hpp"
#include "facelayers/config.hpp"
#include "facelayers/error.hpp"
#include "facelayers/face_model.hpp"
#include "facelayers/filter.hpp"
#include "facelayers/image_io.hpp"
#include "facelayers/makeup.hpp"
#include "facelayers/makeup_pca.hpp"
#include "facelayers/model_io.hpp"
#include "facelayers/parallel.hpp"
#include "facelayers/pipeline.hpp"
#include "facelayers/refine.hpp"
#include "facelayers/scene.hpp"
#include "facelayers/shading.hpp"
#include "facelayers/texture.hpp"
