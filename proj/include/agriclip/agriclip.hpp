#pragma once

#include "agriclip/errors.hpp"
#include "agriclip/numerics/adamw.hpp"
#include "agriclip/numerics/gradcheck.hpp"
#include "agriclip/numerics/kernels.hpp"
#include "agriclip/numerics/rng.hpp"
#include "agriclip/numerics/tensor.hpp"
#include "agriclip/corpus/build.hpp"
#include "agriclip/corpus/dataset.hpp"
#include "agriclip/corpus/prompts.hpp"
#include "agriclip/corpus/render.hpp"
#include "agriclip/corpus/vocab.hpp"
#include "agriclip/encoders/encoder.hpp"
#include "agriclip/contrastive/clip_loss.hpp"
#include "agriclip/contrastive/trainer.hpp"
#include "agriclip/distill/dino_loss.hpp"
#include "agriclip/distill/multi_crop.hpp"
#include "agriclip/distill/trainer.hpp"
#include "agriclip/align/affine.hpp"
#include "agriclip/align/zeroshot.hpp"
#include "agriclip/pipeline/ablation.hpp"
#include "agriclip/pipeline/checkpoint.hpp"
#include "agriclip/pipeline/config.hpp"
#include "agriclip/pipeline/gradient_suite.hpp"
#include "agriclip/pipeline/stages.hpp"
