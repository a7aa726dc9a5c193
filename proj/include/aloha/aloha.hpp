#pragma once

// Umbrella header. Pulls in everything except the HTTP backends, which live
// in http_backends.hpp so that offline users do not pay for httplib.

#include "aloha/assignment.hpp"
#include "aloha/backends.hpp"
#include "aloha/cache.hpp"
#include "aloha/config.hpp"
#include "aloha/digest.hpp"
#include "aloha/error.hpp"
#include "aloha/extraction.hpp"
#include "aloha/filtering.hpp"
#include "aloha/foilgen.hpp"
#include "aloha/matching.hpp"
#include "aloha/metrics.hpp"
#include "aloha/model.hpp"
#include "aloha/pipeline.hpp"
#include "aloha/prompt.hpp"
#include "aloha/text.hpp"
