#pragma once

// Everything except the HTTP layer (wem/http_api.hpp), which pulls in
// cpp-httplib.

#include "wem/base_station.hpp"
#include "wem/firmware.hpp"
#include "wem/live.hpp"
#include "wem/metering.hpp"
#include "wem/modem.hpp"
#include "wem/nv_store.hpp"
#include "wem/rtc.hpp"
#include "wem/scenario.hpp"
#include "wem/simulation.hpp"
#include "wem/telegram.hpp"
