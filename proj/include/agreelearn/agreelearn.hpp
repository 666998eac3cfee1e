#pragma once

#include "agreelearn/antilearn.hpp"
#include "agreelearn/dataset.hpp"
#include "agreelearn/ensemble.hpp"
#include "agreelearn/error.hpp"
#include "agreelearn/evaluation.hpp"
#include "agreelearn/generators.hpp"
#include "agreelearn/io.hpp"
#include "agreelearn/learners/learner.hpp"
#include "agreelearn/parallel.hpp"
#include "agreelearn/ranking.hpp"
#include "agreelearn/survival.hpp"
