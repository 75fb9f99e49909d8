# -*- coding: utf-8 -*-

__author__ = "ddvi-lab developers"
__version__ = "1.0"

import os

from mob_tools.mobLog import MobLoguru

LOG_FILE_ENV = "DDVI_LOG_FILE"

log_file = os.environ.get(LOG_FILE_ENV)
# 设置了日志文件的认为是长跑任务，写文件；否则只打到控制台
if log_file:
    mob_log = MobLoguru(deep=2, log_file=log_file)
else:
    mob_log = MobLoguru()
