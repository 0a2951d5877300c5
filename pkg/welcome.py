
version = "1.0.0"

logo = fr"""
 ____              _   _                  _
|  _ \ _   _ _ __ | |_(_)_ __ ___   ___  / \   ___ ___ _   _ _ __ __ _ _ __   ___ ___
| |_) | | | | '_ \| __| | '_ ` _ \ / _ \/ _ \ / __/ __| | | | '__/ _` | '_ \ / __/ _ \
|  _ <| |_| | | | | |_| | | | | | |  __/ ___ \\__ \__ \ |_| | | | (_| | | | | (_|  __/
|_| \_\\__,_|_| |_|\__|_|_| |_| |_|\___/_/   \_\___/___/\__,_|_|  \__,_|_| |_|\___\___|
                                                                                v{version}
"""


def print_welcome():
    print(logo, end="\n\n")
